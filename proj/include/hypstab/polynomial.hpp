#ifndef HYPSTAB_POLYNOMIAL_HPP
#define HYPSTAB_POLYNOMIAL_HPP

#include <cmath>
#include <cstddef>
#include <vector>

namespace hypstab {

/// Dense polynomial with coefficients stored constant-term first.
class Polynomial {
  public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

    double operator()(double x) const {
        double v = 0.0;
        for (std::size_t r = c_.size(); r-- > 0;) v = v * x + c_[r];
        return v;
    }

    double derivative(double x) const {
        double v = 0.0;
        for (std::size_t r = c_.size(); r-- > 1;) v = v * x + c_[r] * static_cast<double>(r);
        return v;
    }

    /// Degree after trimming trailing zeros; the zero polynomial reports -1.
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_constant() const { return c_.size() <= 1; }
    bool is_zero() const { return c_.empty(); }
    const std::vector<double>& coefficients() const { return c_; }

    bool operator==(const Polynomial& other) const { return c_ == other.c_; }

  private:
    void trim() {
        while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    }
    std::vector<double> c_;
};

} // namespace hypstab

#endif
