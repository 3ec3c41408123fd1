#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace skpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` uses OpenMP when the library is built with it and must
/// produce bitwise-identical results.
enum class Exec { serial, parallel };

/// All library errors carry the owning module as a message prefix so the CLI
/// can print a one-line, module-qualified diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string_view module, const std::string& what)
        : std::runtime_error(std::string(module) + ": " + what), module_(module) {}

    std::string_view module() const noexcept { return module_; }

private:
    std::string_view module_;
};

inline void require(bool ok, std::string_view module, const std::string& what) {
    if (!ok) throw Error(module, what);
}

/// Number of OpenMP threads the parallel path will use (1 without OpenMP).
int parallel_threads();

}  // namespace skpca
