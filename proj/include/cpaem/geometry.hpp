#pragma once

#include "cpaem/linalg.hpp"
#include "cpaem/network.hpp"

#include <optional>
#include <vector>

namespace cpaem {

/// Hyperplane that produced an inequality row. Layer 0 marks a bounding-box
/// face, with `unit` = 2*i for z_i <= R and 2*i+1 for -z_i <= R.
struct FaceOrigin {
    int layer = 0;
    int unit = 0;

    bool is_box() const noexcept { return layer == 0; }
    auto operator<=>(const FaceOrigin&) const = default;
};

/// {z : normals z <= offsets}.
struct PolytopeH {
    Mat normals;  // F x S
    Vec offsets;  // F
    std::vector<FaceOrigin> face_origin;

    int dim() const noexcept { return static_cast<int>(normals.cols()); }
    int faces() const noexcept { return static_cast<int>(normals.rows()); }
    /// Keeps only the listed rows, in the given order.
    PolytopeH subset(const std::vector<int>& rows) const;
    bool contains(const Vec& z, double tol) const;
};

struct GeometryTolerances {
    double feasibility = 1e-8;
    double redundancy = 1e-9;
    double vertex_merge = 1e-7;
    double empty_margin = 1e-9;
};

struct Simplex {
    std::vector<Vec> vertices;  // S + 1 points

    double volume() const;
};

/// One inclusion-exclusion term: sign * indicator{z : (R z)_i >= lower_i}.
/// Rows with lower_i = -inf are unconstrained completion directions.
struct SignedOrthantPiece {
    int sign = 1;
    Mat transform;  // S x S, invertible
    Vec lower;      // S, entries may be -inf
};

/// Signed pieces of a simplex. The J = {} term of the inclusion-exclusion is
/// the whole space; it is kept apart as `full_space_sign` so that the pieces
/// list holds exactly the 2^{S+1} - 2 orthant terms.
struct ConeDecomposition {
    std::vector<SignedOrthantPiece> pieces;
    int full_space_sign = 0;

    void append(const ConeDecomposition& other);
};

struct Region {
    ActivationCode code;
    PolytopeH hrep;  // reduced, including any bounding-box faces
    std::vector<Vec> vertices;
    AffineMap affine;
    bool clipped = false;
    Vec interior;
    std::vector<Simplex> simplices;
    ConeDecomposition cones;  // all simplices, concatenated
};

struct Partition {
    std::vector<Region> regions;  // sorted by code
    double bounding_radius = 0.0;

    /// Index of the region with `code`, or -1.
    int find(const ActivationCode& code) const;
    std::size_t size() const noexcept { return regions.size(); }
};

/// Inequalities q^l_k (A^{1->l} z + b^{1->l})_k >= 0 for every hidden unit,
/// written as rows (-q A) z <= q b. Rows with a zero normal are dropped.
PolytopeH region_hrep(const GenerativeNetwork& net, const ActivationCode& code);

/// Adds |z_i| <= radius rows.
PolytopeH with_box(const PolytopeH& h, double radius);

/// Chebyshev centre of the polytope, or nullopt when the largest inscribed
/// ball has radius <= tol.empty_margin.
std::optional<Vec> interior_point(const PolytopeH& h, const GeometryTolerances& tol = {});

/// Indices of the non-redundant rows (the facets). Rows are tested in order
/// against the rows still kept, so of a set of duplicates exactly one remains.
std::vector<int> reduce_inequalities(const PolytopeH& h, const GeometryTolerances& tol = {});

/// Vertices of a bounded polytope by exhaustive S-subset intersection.
std::vector<Vec> vertex_enumeration(const PolytopeH& h, const GeometryTolerances& tol = {});

/// Fan triangulation of the convex hull of `vertices` (S <= 3).
std::vector<Simplex> triangulate(const std::vector<Vec>& vertices);

ConeDecomposition cone_decomposition(const Simplex& simplex);

/// Builds the complete region (reduced H-rep, vertices, simplices, cones) for
/// a code, or nullopt when the code's polytope has empty interior in the box.
std::optional<Region> build_region(const GenerativeNetwork& net, const ActivationCode& code,
                                   double bounding_radius, const GeometryTolerances& tol = {});

struct PartitionOptions {
    double bounding_radius = 8.0;
    std::size_t max_regions = 1000000;
    GeometryTolerances tol;
};

/// Breadth-first face walk from the region containing `seed`.
Partition enumerate_partition(const GenerativeNetwork& net, const Vec& seed,
                              const PartitionOptions& options);

/// 8 * max_i sqrt(Sigma_z[i,i]).
double default_bounding_radius(const Mat& sigma_z);

}  // namespace cpaem
