#include "kfssi/error.hpp"

namespace kfssi {

void fail(ErrorClass cls, const std::string& what) { throw Error(cls, what); }

const char* to_string(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::invalid_argument: return "invalid argument";
    case ErrorClass::invalid_data: return "invalid data";
    case ErrorClass::numerical: return "numerical failure";
    case ErrorClass::identification: return "identification failure";
    case ErrorClass::harmonics: return "harmonics error";
    case ErrorClass::io: return "i/o error";
  }
  return "error";
}

}  // namespace kfssi
