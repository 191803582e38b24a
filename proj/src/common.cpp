#include "feti/common.hpp"

#include <array>
#include <utility>

namespace feti {

namespace {

template <typename E, std::size_t N>
E lookup(const std::array<std::pair<std::string_view, E>, N>& table, std::string_view text, const char* what)
{
    for (const auto& [name, value] : table) {
        if (name == text) return value;
    }
    throw InvalidArgument(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr std::array<std::pair<std::string_view, Physics>, 2> physics_names{{
    {"heat", Physics::heat}, {"elasticity", Physics::elasticity}}};
constexpr std::array<std::pair<std::string_view, Order>, 2> order_names{{
    {"row", Order::row}, {"col", Order::col}}};
constexpr std::array<std::pair<std::string_view, Storage>, 2> storage_names{{
    {"sparse", Storage::sparse}, {"dense", Storage::dense}}};
constexpr std::array<std::pair<std::string_view, Strategy>, 3> strategy_names{{
    {"implicit", Strategy::implicit}, {"explicit", Strategy::explicit_assembly}, {"schur_oracle", Strategy::schur_oracle}}};
constexpr std::array<std::pair<std::string_view, Path>, 2> path_names{{
    {"trsm", Path::trsm}, {"syrk", Path::syrk}}};
constexpr std::array<std::pair<std::string_view, Staging>, 2> staging_names{{
    {"per_subdomain", Staging::per_subdomain}, {"cluster_wide", Staging::cluster_wide}}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, E>, N>& table, E value)
{
    for (const auto& [name, v] : table) {
        if (v == value) return name;
    }
    return "?";
}

} // namespace

std::string_view to_string(Physics v) { return name_of(physics_names, v); }
std::string_view to_string(Order v) { return name_of(order_names, v); }
std::string_view to_string(Storage v) { return name_of(storage_names, v); }
std::string_view to_string(Strategy v) { return name_of(strategy_names, v); }
std::string_view to_string(Path v) { return name_of(path_names, v); }
std::string_view to_string(Staging v) { return name_of(staging_names, v); }

template <> Physics parse<Physics>(std::string_view t) { return lookup(physics_names, t, "physics"); }
template <> Order parse<Order>(std::string_view t) { return lookup(order_names, t, "order"); }
template <> Storage parse<Storage>(std::string_view t) { return lookup(storage_names, t, "storage"); }
template <> Strategy parse<Strategy>(std::string_view t) { return lookup(strategy_names, t, "strategy"); }
template <> Path parse<Path>(std::string_view t) { return lookup(path_names, t, "path"); }
template <> Staging parse<Staging>(std::string_view t) { return lookup(staging_names, t, "staging"); }

} // namespace feti
