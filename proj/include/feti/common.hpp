#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace feti {

using Index = int;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or precondition violation (shapes, sizes, unknown names).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A matrix expected to be SPD produced a non-positive pivot.
class NotSpdError : public Error {
public:
    NotSpdError(const std::string& what, Index pivot, Index subdomain = -1)
        : Error(what), pivot_(pivot), subdomain_(subdomain) {}
    Index pivot() const { return pivot_; }
    Index subdomain() const { return subdomain_; }

private:
    Index pivot_;
    Index subdomain_;
};

/// Lifecycle misuse (prepare twice, apply before preprocess, double release).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Iterative solver failure (breakdown, iteration limit, residual check).
class SolverError : public Error {
public:
    using Error::Error;
};

enum class Physics { heat, elasticity };
enum class Order { row, col };
enum class Storage { sparse, dense };
enum class Strategy { implicit, explicit_assembly, schur_oracle };
enum class Path { trsm, syrk };
enum class Staging { per_subdomain, cluster_wide };
enum class Execution { serial, openmp };

std::string_view to_string(Physics v);
std::string_view to_string(Order v);
std::string_view to_string(Storage v);
std::string_view to_string(Strategy v);
std::string_view to_string(Path v);
std::string_view to_string(Staging v);

template <typename E>
E parse(std::string_view text);

template <> Physics parse<Physics>(std::string_view text);
template <> Order parse<Order>(std::string_view text);
template <> Storage parse<Storage>(std::string_view text);
template <> Strategy parse<Strategy>(std::string_view text);
template <> Path parse<Path>(std::string_view text);
template <> Staging parse<Staging>(std::string_view text);

inline std::size_t dofs_per_node(Physics physics, int dim)
{
    return physics == Physics::heat ? 1 : static_cast<std::size_t>(dim);
}

} // namespace feti
