#ifndef VHMPC_TUBE_HPP
#define VHMPC_TUBE_HPP

#include <cstdint>
#include <vector>

#include "vhmpc/setalgebra.hpp"

namespace vhmpc
{

/// Largest n* approximate_sinf will try before giving up.
inline constexpr int kSinfMaxOrder = 10000;
/// Random directions added to the 2n axis directions in the contraction test.
inline constexpr int kSinfRandomDirections = 32;
inline constexpr std::uint64_t kSinfDirectionSeed = 0x5eed5eedULL;

/// Disturbance tube S(0), S(1), ... for e+ = A_K e + w, w in W.
///
/// Single writer: extend() appends, everything else is const and may be read
/// concurrently once the cache is no longer growing.
class TubeCache
{
public:
    TubeCache() = default;
    TubeCache(Matrix closed_loop, Box disturbance, int capacity = 0);

    const Matrix& closed_loop() const { return a_k_; }
    const Box& disturbance() const { return w_; }
    const Zonotope& disturbance_zonotope() const { return w_zono_; }
    int dim() const { return static_cast<int>(a_k_.rows()); }

    /// Largest k held in the cache.
    int capacity() const { return static_cast<int>(tubes_.size()) - 1; }
    void extend(int k);

    /// S(k). Beyond capacity the set is built on the fly (nothing cached).
    Zonotope tube_at(int k) const;
    const Zonotope& cached(int k) const { return tubes_.at(static_cast<std::size_t>(k)); }

    /// A_K^i, and the generator block A_K^i G_W.
    Matrix power(int i) const;
    Matrix block(int i) const;

private:
    Matrix a_k_;
    Box w_{Vector::Zero(1), Vector::Zero(1)};
    Zonotope w_zono_;
    std::vector<Matrix> powers_;
    std::vector<Zonotope> tubes_;
};

struct SinfApprox
{
    Zonotope set;      ///< (1 - alpha)^-1 S(n*)
    int order = 0;     ///< n*
    double alpha = 0;  ///< achieved contraction
    /// Generators of `set` are blocks A_K^i G_W / (1 - alpha), i < n*,
    /// each block_width columns wide, in order.
    int block_width = 0;
};

/// Smallest n* with h(A_K^n* W, d) <= alpha h(W, d) over the test directions,
/// alpha <= contraction_tol. Throws std::runtime_error past kSinfMaxOrder.
SinfApprox approximate_sinf(const Matrix& a_k, const Box& w, double contraction_tol);

struct Tightened
{
    HPolytope state;  ///< X(k+j) minus S(j)
    HPolytope input;  ///< U(k+j) minus K S(j)
    bool empty = false;
};

/// Support-function tightening. `empty` is set when two opposite rows cross
/// (exact for boxes); pass lp_check to also run the LP emptiness test.
Tightened tighten(const HPolytope& x_kj, const HPolytope& u_kj, const Matrix& k_gain, const Zonotope& s_j,
                  bool lp_check = false);

/// True when some pair of rows with opposite normals has b_1 + b_2 < -tol.
bool has_crossed_rows(const HPolytope& p, double tol = 1e-12);

}  // namespace vhmpc

#endif
