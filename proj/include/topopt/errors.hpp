#pragma once

#include <stdexcept>
#include <string>

namespace topopt {

// Raised when a task document or its resolved boundary conditions are invalid.
class TaskError : public std::runtime_error {
 public:
  explicit TaskError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when the linear solve fails (typically an insufficiently supported
// structure whose stiffness matrix is not positive definite).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace topopt
