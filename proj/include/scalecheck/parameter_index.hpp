#ifndef SCALECHECK_PARAMETER_INDEX_HPP
#define SCALECHECK_PARAMETER_INDEX_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scalecheck/model.hpp"

namespace scalecheck {

class ConstraintError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Full parameter layout of a spec: loadings (indicator order), latent
/// (co)variances (lower triangle, row-major), residual variances, then the
/// free residual covariances in spec order.
inline std::vector<ParamAddress> parameter_layout(const ModelSpec& spec) {
    std::vector<ParamAddress> out;
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    for (auto [f, i] : spec.loadings()) out.push_back(ParamAddress::loading(F[f], X[i]));
    for (std::size_t a = 0; a < F.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) out.push_back(ParamAddress::latent(F[b], F[a]));
    for (const auto& x : X) out.push_back(ParamAddress::residual(x, x));
    for (auto [i, j] : spec.residual_covariances()) out.push_back(ParamAddress::residual(X[i], X[j]));
    return out;
}

/// Affine map from the reduced (free) parameter vector to the full vector,
/// full = basis * reduced + offset, built so that every compiled constraint
/// holds identically. Reduced coordinate k is the full parameter at
/// `free_positions()[k]`.
class ParameterIndex {
public:
    ParameterIndex(std::vector<ParamAddress> layout, Eigen::MatrixXd basis, Eigen::VectorXd offset,
                   std::vector<std::size_t> free_positions, Eigen::MatrixXd constraint_matrix,
                   Eigen::VectorXd constraint_rhs)
        : layout_(std::move(layout)), basis_(std::move(basis)), offset_(std::move(offset)),
          free_(std::move(free_positions)), cmat_(std::move(constraint_matrix)), crhs_(std::move(constraint_rhs)) {}

    std::size_t full_size() const noexcept { return layout_.size(); }
    std::size_t reduced_size() const noexcept { return free_.size(); }
    std::size_t num_constraints() const noexcept { return static_cast<std::size_t>(cmat_.rows()); }

    const std::vector<ParamAddress>& layout() const noexcept { return layout_; }
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const Eigen::VectorXd& offset() const noexcept { return offset_; }
    const std::vector<std::size_t>& free_positions() const noexcept { return free_; }

    /// Constraint system C * full = d as compiled.
    const Eigen::MatrixXd& constraint_matrix() const noexcept { return cmat_; }
    const Eigen::VectorXd& constraint_rhs() const noexcept { return crhs_; }

    std::size_t position(const ParamAddress& a) const {
        for (std::size_t k = 0; k < layout_.size(); ++k)
            if (layout_[k] == a) return k;
        throw ConstraintError("parameter " + a.to_string() + " is not part of the model");
    }

    /// Full position is determined by the constraints alone.
    bool is_fixed(std::size_t full_pos) const { return basis_.row(static_cast<Eigen::Index>(full_pos)).isZero(0.0); }

    Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const { return basis_ * reduced + offset_; }

    Eigen::VectorXd reduce(const Eigen::VectorXd& full) const {
        Eigen::VectorXd r(static_cast<Eigen::Index>(free_.size()));
        for (std::size_t k = 0; k < free_.size(); ++k) r[static_cast<Eigen::Index>(k)] = full[static_cast<Eigen::Index>(free_[k])];
        return r;
    }

    /// Max |C * full - d|.
    double constraint_violation(const Eigen::VectorXd& full) const {
        if (cmat_.rows() == 0) return 0.0;
        return (cmat_ * full - crhs_).cwiseAbs().maxCoeff();
    }

    /// Least-squares projection of an arbitrary full vector onto the feasible set.
    Eigen::VectorXd project(const Eigen::VectorXd& full) const {
        if (free_.empty()) return Eigen::VectorXd(0);
        return basis_.colPivHouseholderQr().solve(full - offset_);
    }

private:
    std::vector<ParamAddress> layout_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd offset_;
    std::vector<std::size_t> free_;
    Eigen::MatrixXd cmat_;
    Eigen::VectorXd crhs_;
};

/// Eliminates the linear constraints by reducing [C | d] to row-echelon form
/// with partial pivoting; pivot columns become dependent parameters and the
/// remaining columns form the reduced vector.
inline ParameterIndex compile_constraints(const ModelSpec& spec, const std::vector<Constraint>& constraints) {
    auto layout = parameter_layout(spec);
    const auto n = static_cast<Eigen::Index>(layout.size());
    const auto r = static_cast<Eigen::Index>(constraints.size());

    auto find = [&](const ParamAddress& a) -> Eigen::Index {
        for (Eigen::Index k = 0; k < n; ++k)
            if (layout[static_cast<std::size_t>(k)] == a) return k;
        throw ConstraintError("constraint references unknown parameter " + a.to_string());
    };

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(r, n);
    Eigen::VectorXd d(r);
    for (Eigen::Index row = 0; row < r; ++row) {
        const auto& c = constraints[static_cast<std::size_t>(row)];
        if (c.terms.empty()) throw ConstraintError("empty constraint");
        for (const auto& t : c.terms) C(row, find(t.param)) += t.coefficient;
        d[row] = c.target;
    }

    Eigen::MatrixXd A = C;
    Eigen::VectorXd b = d;
    std::vector<Eigen::Index> pivots;
    const double scale = A.size() ? std::max(1.0, A.cwiseAbs().maxCoeff()) : 1.0;
    const double tol = 1e-10 * scale;

    Eigen::Index row = 0;
    for (Eigen::Index col = 0; col < n && row < r; ++col) {
        Eigen::Index best = row;
        for (Eigen::Index k = row + 1; k < r; ++k)
            if (std::abs(A(k, col)) > std::abs(A(best, col))) best = k;
        if (std::abs(A(best, col)) <= tol) continue;
        A.row(row).swap(A.row(best));
        std::swap(b[row], b[best]);
        const double pv = A(row, col);
        A.row(row) /= pv;
        b[row] /= pv;
        for (Eigen::Index k = 0; k < r; ++k) {
            if (k == row || A(k, col) == 0.0) continue;
            const double f = A(k, col);
            A.row(k) -= f * A.row(row);
            b[k] -= f * b[row];
        }
        pivots.push_back(col);
        ++row;
    }
    for (Eigen::Index k = row; k < r; ++k)
        if (std::abs(b[k]) > tol * std::max(1.0, d.cwiseAbs().maxCoeff()))
            throw ConstraintError("inconsistent constraints: the system has no solution");
    if (row < r) throw ConstraintError("redundant constraints: the constraint system is rank deficient");

    std::vector<bool> is_pivot(static_cast<std::size_t>(n), false);
    for (auto p : pivots) is_pivot[static_cast<std::size_t>(p)] = true;
    std::vector<std::size_t> free;
    for (Eigen::Index k = 0; k < n; ++k)
        if (!is_pivot[static_cast<std::size_t>(k)]) free.push_back(static_cast<std::size_t>(k));

    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, m);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < m; ++j) basis(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)]), j) = 1.0;
    for (std::size_t i = 0; i < pivots.size(); ++i) {
        const auto ri = static_cast<Eigen::Index>(i);
        offset[pivots[i]] = b[ri];
        for (Eigen::Index j = 0; j < m; ++j) {
            double v = -A(ri, static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)]));
            basis(pivots[i], j) = std::abs(v) <= tol ? 0.0 : v;
        }
    }
    return ParameterIndex(std::move(layout), std::move(basis), std::move(offset), std::move(free), std::move(C),
                          std::move(d));
}

/// p(p+1)/2 minus the number of free parameters.
inline int degrees_of_freedom(const ModelSpec& spec, const ParameterIndex& index) {
    const auto df = static_cast<long long>(spec.num_moments()) - static_cast<long long>(index.reduced_size());
    if (df < 0)
        throw ConstraintError("model is not estimable: " + std::to_string(index.reduced_size()) +
                              " free parameters exceed " + std::to_string(spec.num_moments()) + " sample moments");
    return static_cast<int>(df);
}

} // namespace scalecheck

#endif // SCALECHECK_PARAMETER_INDEX_HPP
