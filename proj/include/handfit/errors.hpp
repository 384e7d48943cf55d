#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace handfit {

// Base for all recoverable failures. Carries a stable class name so the CLI
// can emit machine-readable error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string cls, const std::string& msg)
      : std::runtime_error(msg), class_(std::move(cls)) {}
  const std::string& error_class() const { return class_; }

 private:
  std::string class_;
};

#define HANDFIT_ERROR_CLASS(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}    \
  }

HANDFIT_ERROR_CLASS(NonPositiveBoneLength);
HANDFIT_ERROR_CLASS(BehindCamera);
HANDFIT_ERROR_CLASS(EmptyCrop);
HANDFIT_ERROR_CLASS(EmptyImage);
HANDFIT_ERROR_CLASS(MissingIntrinsics);
HANDFIT_ERROR_CLASS(EmptyCloud);
HANDFIT_ERROR_CLASS(DegenerateClusters);
HANDFIT_ERROR_CLASS(NoSignal);
HANDFIT_ERROR_CLASS(ParseError);
HANDFIT_ERROR_CLASS(ValidationError);

#undef HANDFIT_ERROR_CLASS

}  // namespace handfit
