#ifndef PARTSDET_ERRORS_HPP
#define PARTSDET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace partsdet {

// Validation failures (bad inputs, bad configuration). The CLI maps these
// to exit code 1; everything else that escapes maps to exit code 2.
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct invalid_landmarks_error : validation_error {
  using validation_error::validation_error;
};
struct input_error : validation_error {
  using validation_error::validation_error;
};
struct invalid_parameter_error : validation_error {
  using validation_error::validation_error;
};
struct invalid_box_error : validation_error {
  using validation_error::validation_error;
};
struct manifest_error : validation_error {
  using validation_error::validation_error;
};
struct config_error : validation_error {
  using validation_error::validation_error;
};
struct batch_error : validation_error {
  using validation_error::validation_error;
};

// Runtime failures.
struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct metric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace partsdet

#endif
