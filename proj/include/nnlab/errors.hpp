#pragma once

#include <stdexcept>
#include <string>

namespace nnlab {

// Configuration / validation problems. CLI maps these to exit code 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training-time numeric failures (divergence, non-finite loss). Exit code 2.
struct train_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format and filesystem problems. Exit code 3.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nnlab
