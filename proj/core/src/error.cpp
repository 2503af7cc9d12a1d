#include "tmars/error.hpp"

#include <sstream>

namespace tmars {
namespace {

std::string build_message(const std::string& message,
                          const std::vector<std::string>& ids) {
  std::ostringstream os;
  os << message << " [" << ids.size() << " sample(s):";
  std::size_t shown = 0;
  for (const auto& id : ids) {
    if (shown == 16) {
      os << " ...";
      break;
    }
    os << ' ' << id;
    ++shown;
  }
  os << ']';
  return os.str();
}

}  // namespace

AggregateError::AggregateError(const std::string& message,
                               std::vector<std::string> sample_ids)
    : Error(ErrorKind::aggregate, build_message(message, sample_ids)),
      sample_ids_(std::move(sample_ids)) {}

}  // namespace tmars
