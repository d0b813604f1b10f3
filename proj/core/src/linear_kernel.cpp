#include "linear_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lori::detail {

namespace {

constexpr double kFloor = 1e-300;

#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define LORI_KERNEL_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define LORI_KERNEL_CLONES
#endif

LORI_KERNEL_CLONES
void forward_level(const double* theta, double alpha, double epsilon, std::size_t dim,
                   std::size_t np, const double* diffs, std::size_t stride, double* __restrict d, double* __restrict ps, double* __restrict pp,
                   double* __restrict prefix, double* __restrict running, double* __restrict prob) {
    for (std::size_t p = 0; p < np; ++p) d[p] = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
        const double t = theta[f];
        const double* df = diffs + f * stride;
        for (std::size_t p = 0; p < np; ++p) d[p] += t * df[p];
    }
    // u = exp(-alpha|d|) and c = exp(-alpha eps) lie in (0, 1]: the side d
    // points to gets c/(c+u), the other uc/(uc+1).
    const double c = std::exp(-alpha * epsilon);
    for (std::size_t p = 0; p < np; ++p) {
        const double u = std::exp(-alpha * std::fabs(d[p]));
        const double near = c / (c + u);
        const double far = (u * c) / (u * c + 1.0);
        const bool ahead = d[p] >= 0.0;
        const double s = ahead ? near : far;
        const double q = ahead ? far : near;
        ps[p] = s;
        pp[p] = q;
        prefix[p] = running[p];
        prob[p] += s * running[p];
        running[p] *= std::fmax(0.0, 1.0 - s - q);
    }
}

LORI_KERNEL_CLONES
double log_terms(std::size_t np, const double* prob, const double* counts, double* outer,
                 std::size_t& underflows) {
    double value = 0.0;
    std::size_t low = 0;
    for (std::size_t p = 0; p < np; ++p) {
        const double clamped = std::fmax(prob[p], kFloor);
        low += prob[p] < kFloor ? 1 : 0;
        value -= counts[p] * std::log(clamped);
        outer[p] = -counts[p] / clamped;
    }
    underflows += low;
    return value;
}

LORI_KERNEL_CLONES
void backward_level(double alpha, double epsilon, std::size_t dim, std::size_t np,
                    const double* diffs, std::size_t stride, const double* d, const double* ps, const double* pp,
                    const double* prefix, const double* outer, double* suffix, double* gd,
                    double* grad_theta, double& grad_alpha, double& grad_epsilon) {
    double ga = 0.0;
    double ge = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        const double s = ps[p];
        const double q = pp[p];
        const double ss = s * (1.0 - s);
        const double sq = q * (1.0 - q);
        const double w_succ = prefix[p];
        const double w_equiv = prefix[p] * suffix[p];
        const double lo = d[p] - epsilon;
        const double hi = -d[p] - epsilon;
        gd[p] = outer[p] * alpha * (w_succ * ss - w_equiv * (ss - sq));
        ga += outer[p] * (w_succ * lo * ss - w_equiv * (lo * ss + hi * sq));
        ge -= outer[p] * alpha * (w_succ * ss - w_equiv * (ss + sq));
        suffix[p] = s + std::fmax(0.0, 1.0 - s - q) * suffix[p];
    }
    grad_alpha += ga;
    grad_epsilon += ge;
    for (std::size_t f = 0; f < dim; ++f) {
        const double* df = diffs + f * stride;
        double acc = 0.0;
        for (std::size_t p = 0; p < np; ++p) acc += gd[p] * df[p];
        grad_theta[f] += acc;
    }
}

}  // namespace

LinearPassOut linear_nll_pass(const LinearLevelView* levels, std::size_t k, std::size_t dim,
                              std::size_t np, const double* diffs, const double* counts,
                              double* grad_theta, double* grad_alpha, double* grad_epsilon) {
    // Pairs go through in blocks so every per-level buffer stays in cache.
    constexpr std::size_t kBlock = 512;
    std::vector<double> d(k * kBlock), ps(k * kBlock), pp(k * kBlock), prefix(k * kBlock);
    std::vector<double> running(kBlock), prob(kBlock), outer(kBlock), suffix(kBlock), gd(kBlock);
    if (grad_theta) {
        std::fill(grad_theta, grad_theta + k * dim, 0.0);
        std::fill(grad_alpha, grad_alpha + k, 0.0);
        std::fill(grad_epsilon, grad_epsilon + k, 0.0);
    }
    LinearPassOut out;
    for (std::size_t start = 0; start < np; start += kBlock) {
        const std::size_t n = std::min(kBlock, np - start);
        const double* block = diffs + start;
        std::fill(running.begin(), running.end(), 1.0);
        std::fill(prob.begin(), prob.end(), 0.0);
        for (std::size_t l = 0; l < k; ++l) {
            forward_level(levels[l].theta, levels[l].alpha, levels[l].epsilon, dim, n, block, np,
                          d.data() + l * kBlock, ps.data() + l * kBlock, pp.data() + l * kBlock,
                          prefix.data() + l * kBlock, running.data(), prob.data());
        }
        out.value += log_terms(n, prob.data(), counts + start, outer.data(), out.underflows);
        if (!grad_theta) continue;

        std::fill(suffix.begin(), suffix.end(), 0.0);
        for (std::size_t l = k; l-- > 0;) {
            backward_level(levels[l].alpha, levels[l].epsilon, dim, n, block, np,
                           d.data() + l * kBlock, ps.data() + l * kBlock, pp.data() + l * kBlock,
                           prefix.data() + l * kBlock, outer.data(), suffix.data(), gd.data(),
                           grad_theta + l * dim, grad_alpha[l], grad_epsilon[l]);
        }
    }
    return out;
}

}  // namespace lori::detail
