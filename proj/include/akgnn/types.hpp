#ifndef AKGNN_TYPES_HPP
#define AKGNN_TYPES_HPP

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace akgnn {

/// Dense row-major matrix over the given scalar. All model tensors use this layout.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A hyperparameter or call argument is outside its legal range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data (files, edge lists, labels, splits) is malformed.
class DataError : public Error {
public:
    using Error::Error;
};

/// A numeric argument is NaN or infinite.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Kernel normalization would divide by zero.
class DegenerateKernelError : public Error {
public:
    using Error::Error;
};

/// A caller broke an API precondition (non-scalar loss, asymmetric input, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

inline std::string shape_string(Index rows, Index cols)
{
    return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
std::string shape_string(const Eigen::MatrixBase<Derived>& m)
{
    return shape_string(m.rows(), m.cols());
}

/// relu and its subgradient, with relu'(0) = 0. Shared by the kernel and the tape.
template <typename Scalar>
constexpr Scalar relu(Scalar x) noexcept
{
    return x > Scalar(0) ? x : Scalar(0);
}

template <typename Scalar>
constexpr Scalar relu_derivative(Scalar x) noexcept
{
    return x > Scalar(0) ? Scalar(1) : Scalar(0);
}

} // namespace akgnn

#endif // AKGNN_TYPES_HPP
