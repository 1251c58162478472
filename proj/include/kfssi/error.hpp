#pragma once

#include <stdexcept>
#include <string>

namespace kfssi {

/// Coarse error categories. The CLI maps each one to a distinct exit code.
enum class ErrorClass {
  invalid_argument,   // violated precondition or bad configuration
  invalid_data,       // dataset failed ingestion validation
  numerical,          // non-finite arithmetic or ill-conditioned problem
  identification,     // e.g. order exceeds rank, no persistent modes
  harmonics,          // harmonics unresolved / no harmonic excitation
  io,                 // unreadable input or unwritable output
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}

  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

[[noreturn]] void fail(ErrorClass cls, const std::string& what);

// Shorthand for the most common case.
[[noreturn]] inline void invalid(const std::string& what) { fail(ErrorClass::invalid_argument, what); }

const char* to_string(ErrorClass cls) noexcept;

}  // namespace kfssi
