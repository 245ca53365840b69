// Generators for the four benchmark families, with the published data
// embedded: the temporal network (both uncertainty sets), the three-product
// newsvendor, the eight-location lot-sizing network, and the seeded random
// family.
#pragma once

#include <cstdint>

#include "arlp/model.hpp"

namespace arlp::instances {

/// Temporal network with s stages; j = 1 takes the 1-norm uncertainty set
/// (polyhedral cone with 2^s rows, s <= 10), j = 2 the Euclidean ball
/// (second-order cone). The first stage is empty and the change of
/// variables u = (1, 2 xi - 1) is baked into F.
model::AroInstance temporal(int s, int j);

/// Three-product newsvendor in minimization form over the lifted
/// (zeta+, zeta-) uncertainty polytope; values are reported in this
/// minimization sign convention.
model::AroInstance newsvendor();

enum class LotSizingUncertainty { Ball, Budget };

/// Lot-sizing on an eight-location network with the published transport
/// costs; shipping variables cover ordered pairs i != j.
model::AroInstance lotsizing(LotSizingUncertainty uncertainty);

/// Random family with (k, m, n1, n2) = (17, 16, 3, 5), free first stage and
/// unit-ball uncertainty; construction guarantees F u <= 0 on the slice and
/// c, d >= 0. Deterministic in the seed.
model::AroInstance random_instance(std::uint64_t seed);

}  // namespace arlp::instances
