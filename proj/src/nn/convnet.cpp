#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/kernels.hpp"
#include "cfsl/nn.hpp"

namespace cfsl::nn {

using kernels::Trans;

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// col[(c*9 + ky*3 + kx), r*S + x] = in[c, r + ky - 1, x + kx - 1], zero padded.
template <class T>
void im2col(const T* in, int channels, int side, T* col) {
    const int hw = side * side;
    for (int c = 0; c < channels; ++c) {
        const T* plane = in + static_cast<std::ptrdiff_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = col + static_cast<std::ptrdiff_t>(c * 9 + ky * 3 + kx) * hw;
                for (int r = 0; r < side; ++r) {
                    const int sr = r + ky - 1;
                    T* dst = row + static_cast<std::ptrdiff_t>(r) * side;
                    if (sr < 0 || sr >= side) {
                        std::fill(dst, dst + side, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::ptrdiff_t>(sr) * side;
                    for (int x = 0; x < side; ++x) {
                        const int sx = x + kx - 1;
                        dst[x] = (sx >= 0 && sx < side) ? src[sx] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int channels, int side, T* out) {
    const int hw = side * side;
    for (int c = 0; c < channels; ++c) {
        T* plane = out + static_cast<std::ptrdiff_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = col + static_cast<std::ptrdiff_t>(c * 9 + ky * 3 + kx) * hw;
                for (int r = 0; r < side; ++r) {
                    const int sr = r + ky - 1;
                    if (sr < 0 || sr >= side) continue;
                    const T* src = row + static_cast<std::ptrdiff_t>(r) * side;
                    T* dst = plane + static_cast<std::ptrdiff_t>(sr) * side;
                    for (int x = 0; x < side; ++x) {
                        const int sx = x + kx - 1;
                        if (sx >= 0 && sx < side) dst[sx] += src[x];
                    }
                }
            }
        }
    }
}

}  // namespace

int output_side(const NetShape& shape) {
    int side = shape.image_size;
    for (int s = 0; s < shape.stages; ++s) side /= 2;
    return side;
}

int embedding_dim(const NetShape& shape) {
    const int side = output_side(shape);
    return shape.filters * side * side;
}

template <class T>
ConvNet<T>::ConvNet(const NetShape& shape, std::uint64_t seed) : shape_(shape) {
    if (shape.image_size < 2 || shape.filters < 1 || shape.stages < 1) {
        throw ConfigError("network needs image_size >= 2, filters >= 1, stages >= 1");
    }
    if (output_side(shape) < 1) {
        throw ConfigError(std::to_string(shape.stages) + " pooling stages collapse a " +
                          std::to_string(shape.image_size) + "px image");
    }
    Rng rng = Rng::derive(seed, {0xc0ffeeu});
    int side = shape.image_size;
    int cin = 1;
    for (int s = 0; s < shape.stages; ++s) {
        Stage st;
        st.cin = cin;
        st.side = side;
        const std::size_t wsize = static_cast<std::size_t>(shape.filters) * cin * 9;
        st.w.resize(wsize);
        const double stddev = std::sqrt(2.0 / (cin * 9.0));
        for (auto& v : st.w) v = static_cast<T>(rng.normal(0.0, stddev));
        st.gw.assign(wsize, T(0));
        const auto f = static_cast<std::size_t>(shape.filters);
        st.gamma.assign(f, T(1));
        st.beta.assign(f, T(0));
        st.ggamma.assign(f, T(0));
        st.gbeta.assign(f, T(0));
        st.run_mean.assign(f, T(0));
        st.run_var.assign(f, T(1));
        stages_.push_back(std::move(st));
        cin = shape.filters;
        side /= 2;
    }
}

template <class T>
void ConvNet<T>::reset_head(int outputs, Rng* rng, T scale) {
    if (outputs < 1) throw ConfigError("head needs at least one output");
    head_outputs_ = outputs;
    const std::size_t d = static_cast<std::size_t>(embedding_dim());
    hw_.assign(static_cast<std::size_t>(outputs) * d, T(0));
    if (rng != nullptr) {
        for (auto& v : hw_) v = static_cast<T>(rng->normal(0.0, static_cast<double>(scale)));
    }
    ghw_.assign(hw_.size(), T(0));
    hb_.assign(static_cast<std::size_t>(outputs), T(0));
    ghb_.assign(hb_.size(), T(0));
}

template <class T>
void ConvNet<T>::drop_head() {
    head_outputs_ = 0;
    hw_.clear();
    ghw_.clear();
    hb_.clear();
    ghb_.clear();
}

template <class T>
void ConvNet<T>::stage_forward(Stage& st, std::span<const T> in, int n, BnMode mode, std::vector<T>& out,
                               StageCache* sc) {
    const int f = shape_.filters;
    const int side = st.side;
    const int hw = side * side;
    const int c9 = st.cin * 9;
    const std::size_t plane_out = static_cast<std::size_t>(f) * hw;

    std::vector<T> z(plane_out * n);
    std::vector<T> col(static_cast<std::size_t>(c9) * hw);
    for (int i = 0; i < n; ++i) {
        im2col(in.data() + static_cast<std::size_t>(i) * st.cin * hw, st.cin, side, col.data());
        kernels::gemm<T>(Trans::no, Trans::no, f, hw, c9, T(1), st.w.data(), c9, col.data(), hw, T(0),
                         z.data() + plane_out * i, hw);
    }

    // Per-channel statistics over batch and space.
    std::vector<T> mean(static_cast<std::size_t>(f)), invstd(static_cast<std::size_t>(f));
    const double count = static_cast<double>(n) * hw;
    for (int c = 0; c < f; ++c) {
        if (mode == BnMode::batch) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const T* p = z.data() + plane_out * i + static_cast<std::size_t>(c) * hw;
                for (int k = 0; k < hw; ++k) s += p[k];
            }
            const double mu = s / count;
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                const T* p = z.data() + plane_out * i + static_cast<std::size_t>(c) * hw;
                for (int k = 0; k < hw; ++k) {
                    const double d = p[k] - mu;
                    v += d * d;
                }
            }
            const double var = v / count;
            mean[c] = static_cast<T>(mu);
            invstd[c] = static_cast<T>(1.0 / std::sqrt(var + kBnEps));
            const double unbiased = count > 1 ? var * count / (count - 1) : var;
            st.run_mean[c] = static_cast<T>((1 - kBnMomentum) * st.run_mean[c] + kBnMomentum * mu);
            st.run_var[c] = static_cast<T>((1 - kBnMomentum) * st.run_var[c] + kBnMomentum * unbiased);
        } else {
            mean[c] = st.run_mean[c];
            invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(st.run_var[c]) + kBnEps));
        }
    }

    const int so = side / 2;
    const std::size_t plane_pool = static_cast<std::size_t>(f) * so * so;
    out.assign(plane_pool * n, T(0));
    if (sc != nullptr) {
        sc->input.assign(in.begin(), in.end());
        sc->xhat.resize(z.size());
        sc->y.resize(z.size());
        sc->invstd = invstd;
        sc->argmax.assign(out.size(), 0);
    }

    std::vector<T> act(static_cast<std::size_t>(hw));
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < f; ++c) {
            const std::size_t base = plane_out * i + static_cast<std::size_t>(c) * hw;
            const T g = st.gamma[c], b = st.beta[c], mu = mean[c], is = invstd[c];
            for (int k = 0; k < hw; ++k) {
                const T xh = (z[base + k] - mu) * is;
                const T y = g * xh + b;
                if (sc != nullptr) {
                    sc->xhat[base + k] = xh;
                    sc->y[base + k] = y;
                }
                act[k] = !(y <= T(0)) ? y : T(0);  // NaN passes through
            }
            T* dst = out.data() + plane_pool * i + static_cast<std::size_t>(c) * so * so;
            int* arg = sc != nullptr ? sc->argmax.data() + plane_pool * i + static_cast<std::size_t>(c) * so * so : nullptr;
            for (int r = 0; r < so; ++r) {
                for (int x = 0; x < so; ++x) {
                    int best = (2 * r) * side + 2 * x;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (2 * r + dy) * side + 2 * x + dx;
                            if (act[idx] > act[best] || act[idx] != act[idx]) best = idx;
                        }
                    }
                    dst[r * so + x] = act[best];
                    if (arg != nullptr) arg[r * so + x] = best;
                }
            }
        }
    }
}

template <class T>
void ConvNet<T>::forward(std::span<const T> input, int n, BnMode mode, std::vector<T>& out, Cache* cache) {
    const std::size_t expected = static_cast<std::size_t>(n) * shape_.image_size * shape_.image_size;
    if (input.size() != expected) {
        throw ConfigError("network input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(expected));
    }
    if (mode == BnMode::batch && n < 2) throw ConfigError("batch-statistics mode needs at least 2 images");
    if (cache != nullptr) {
        cache->n = n;
        cache->mode = mode;
        cache->stages.resize(stages_.size());
    }
    std::vector<T> cur(input.begin(), input.end());
    std::vector<T> next;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        stage_forward(stages_[s], cur, n, mode, next, cache != nullptr ? &cache->stages[s] : nullptr);
        cur.swap(next);
    }
    if (!has_head()) {
        out = std::move(cur);
        if (cache != nullptr) cache->features = out;
        return;
    }
    const int d = embedding_dim();
    out.resize(static_cast<std::size_t>(n) * head_outputs_);
    for (int i = 0; i < n; ++i) std::copy(hb_.begin(), hb_.end(), out.begin() + static_cast<std::ptrdiff_t>(i) * head_outputs_);
    kernels::gemm<T>(Trans::no, Trans::yes, n, head_outputs_, d, T(1), cur.data(), d, hw_.data(), d, T(1), out.data(),
                     head_outputs_);
    if (cache != nullptr) cache->features = std::move(cur);
}

template <class T>
void ConvNet<T>::stage_backward(Stage& st, const StageCache& sc, int n, BnMode mode, std::span<const T> grad_out,
                                std::vector<T>* grad_in) {
    const int f = shape_.filters;
    const int side = st.side;
    const int hw = side * side;
    const int c9 = st.cin * 9;
    const int so = side / 2;
    const std::size_t plane_out = static_cast<std::size_t>(f) * hw;
    const std::size_t plane_pool = static_cast<std::size_t>(f) * so * so;

    // Route pooled gradients to their argmax, then through ReLU.
    std::vector<T> dy(plane_out * n, T(0));
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < f; ++c) {
            const std::size_t pbase = plane_pool * i + static_cast<std::size_t>(c) * so * so;
            const std::size_t base = plane_out * i + static_cast<std::size_t>(c) * hw;
            for (int k = 0; k < so * so; ++k) {
                const std::size_t idx = base + static_cast<std::size_t>(sc.argmax[pbase + k]);
                if (sc.y[idx] > T(0)) dy[idx] += grad_out[pbase + k];
            }
        }
    }

    std::vector<T> dz(dy.size());
    const double count = static_cast<double>(n) * hw;
    for (int c = 0; c < f; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = plane_out * i + static_cast<std::size_t>(c) * hw;
            for (int k = 0; k < hw; ++k) {
                sum_dy += dy[base + k];
                sum_dy_xhat += static_cast<double>(dy[base + k]) * sc.xhat[base + k];
            }
        }
        st.ggamma[c] += static_cast<T>(sum_dy_xhat);
        st.gbeta[c] += static_cast<T>(sum_dy);
        const T g = st.gamma[c], is = sc.invstd[c];
        if (mode == BnMode::batch) {
            // dz = g * is / M * (M dy - sum(dy) - xhat * sum(dy xhat))
            const T mean_dy = static_cast<T>(sum_dy / count);
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
            for (int i = 0; i < n; ++i) {
                const std::size_t base = plane_out * i + static_cast<std::size_t>(c) * hw;
                for (int k = 0; k < hw; ++k) {
                    dz[base + k] = g * is * (dy[base + k] - mean_dy - sc.xhat[base + k] * mean_dy_xhat);
                }
            }
        } else {
            for (int i = 0; i < n; ++i) {
                const std::size_t base = plane_out * i + static_cast<std::size_t>(c) * hw;
                for (int k = 0; k < hw; ++k) dz[base + k] = g * is * dy[base + k];
            }
        }
    }

    std::vector<T> col(static_cast<std::size_t>(c9) * hw);
    std::vector<T> dcol;
    if (grad_in != nullptr) {
        grad_in->assign(static_cast<std::size_t>(n) * st.cin * hw, T(0));
        dcol.resize(col.size());
    }
    for (int i = 0; i < n; ++i) {
        const T* input = sc.input.data() + static_cast<std::size_t>(i) * st.cin * hw;
        const T* dzi = dz.data() + plane_out * i;
        im2col(input, st.cin, side, col.data());
        kernels::gemm<T>(Trans::no, Trans::yes, f, c9, hw, T(1), dzi, hw, col.data(), hw, T(1), st.gw.data(), c9);
        if (grad_in != nullptr) {
            kernels::gemm<T>(Trans::yes, Trans::no, c9, hw, f, T(1), st.w.data(), c9, dzi, hw, T(0), dcol.data(), hw);
            col2im_add(dcol.data(), st.cin, side, grad_in->data() + static_cast<std::size_t>(i) * st.cin * hw);
        }
    }
}

template <class T>
void ConvNet<T>::backward(const Cache& cache, std::span<const T> grad_out) {
    const int n = cache.n;
    std::vector<T> grad(grad_out.begin(), grad_out.end());
    if (has_head()) {
        const int d = embedding_dim();
        kernels::gemm<T>(Trans::yes, Trans::no, head_outputs_, d, n, T(1), grad.data(), head_outputs_,
                         cache.features.data(), d, T(1), ghw_.data(), d);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < head_outputs_; ++j) ghb_[j] += grad[static_cast<std::size_t>(i) * head_outputs_ + j];
        }
        std::vector<T> dfeat(static_cast<std::size_t>(n) * d);
        kernels::gemm<T>(Trans::no, Trans::no, n, d, head_outputs_, T(1), grad.data(), head_outputs_, hw_.data(), d,
                         T(0), dfeat.data(), d);
        grad.swap(dfeat);
    }
    std::vector<T> grad_in;
    for (std::size_t s = stages_.size(); s-- > 0;) {
        stage_backward(stages_[s], cache.stages[s], n, cache.mode, grad, s > 0 ? &grad_in : nullptr);
        if (s > 0) grad.swap(grad_in);
    }
}

template <class T>
void ConvNet<T>::zero_grad() {
    for (auto& st : stages_) {
        std::fill(st.gw.begin(), st.gw.end(), T(0));
        std::fill(st.ggamma.begin(), st.ggamma.end(), T(0));
        std::fill(st.gbeta.begin(), st.gbeta.end(), T(0));
    }
    std::fill(ghw_.begin(), ghw_.end(), T(0));
    std::fill(ghb_.begin(), ghb_.end(), T(0));
}

template <class T>
void ConvNet<T>::sgd_step(T lr) {
    for (auto& p : params()) kernels::axpy<T>(p.value.size(), -lr, p.grad.data(), p.value.data());
}

template <class T>
std::vector<ParamRef<T>> ConvNet<T>::params() {
    std::vector<ParamRef<T>> out;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        auto& st = stages_[s];
        const std::string prefix = "stage" + std::to_string(s) + ".";
        out.push_back({prefix + "conv", st.w, st.gw});
        out.push_back({prefix + "bn_gamma", st.gamma, st.ggamma});
        out.push_back({prefix + "bn_beta", st.beta, st.gbeta});
    }
    if (has_head()) {
        out.push_back({"head.weight", hw_, ghw_});
        out.push_back({"head.bias", hb_, ghb_});
    }
    return out;
}

template <class T>
std::size_t ConvNet<T>::param_count() const {
    std::size_t n = hw_.size() + hb_.size();
    for (const auto& st : stages_) n += st.w.size() + st.gamma.size() + st.beta.size();
    return n;
}

template <class T>
std::vector<T> ConvNet<T>::body_state() const {
    std::vector<T> out;
    for (const auto& st : stages_) {
        out.insert(out.end(), st.w.begin(), st.w.end());
        out.insert(out.end(), st.gamma.begin(), st.gamma.end());
        out.insert(out.end(), st.beta.begin(), st.beta.end());
        out.insert(out.end(), st.run_mean.begin(), st.run_mean.end());
        out.insert(out.end(), st.run_var.begin(), st.run_var.end());
    }
    return out;
}

template <class T>
void ConvNet<T>::load_body_state(std::span<const T> state) {
    std::size_t expected = 0;
    for (const auto& st : stages_) expected += st.w.size() + 4 * st.gamma.size();
    if (state.size() != expected) {
        throw CheckpointError("body state has " + std::to_string(state.size()) + " values, network expects " +
                              std::to_string(expected));
    }
    auto it = state.begin();
    auto take = [&](std::vector<T>& dst) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    for (auto& st : stages_) {
        take(st.w);
        take(st.gamma);
        take(st.beta);
        take(st.run_mean);
        take(st.run_var);
    }
}

template <class T>
std::vector<T> ConvNet<T>::head_state() const {
    std::vector<T> out(hw_);
    out.insert(out.end(), hb_.begin(), hb_.end());
    return out;
}

template <class T>
void ConvNet<T>::load_head_state(int outputs, std::span<const T> state) {
    reset_head(outputs);
    if (state.size() != hw_.size() + hb_.size()) throw CheckpointError("head state size mismatch");
    std::copy(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(hw_.size()), hw_.begin());
    std::copy(state.begin() + static_cast<std::ptrdiff_t>(hw_.size()), state.end(), hb_.begin());
}

template <class T>
std::uint64_t ConvNet<T>::body_hash() const {
    const auto state = body_state();
    Fnv1a h;
    h.update(std::span<const T>(state));
    return h.digest();
}

template class ConvNet<float>;
template class ConvNet<double>;

template <class T>
void softmax_rows(std::span<const T> logits, int n, int classes, std::vector<T>& probs) {
    probs.resize(static_cast<std::size_t>(n) * classes);
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data() + static_cast<std::size_t>(i) * classes;
        T* out = probs.data() + static_cast<std::size_t>(i) * classes;
        const T mx = *std::max_element(row, row + classes);
        double sum = 0.0;
        for (int j = 0; j < classes; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += out[j];
        }
        for (int j = 0; j < classes; ++j) out[j] = static_cast<T>(out[j] / sum);
    }
}

template <class T>
T softmax_cross_entropy(std::span<const T> logits, int n, int classes, std::span<const int> labels,
                        std::vector<T>* grad) {
    std::vector<T> probs;
    softmax_rows(logits, n, classes, probs);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[i];
        const T* row = logits.data() + static_cast<std::size_t>(i) * classes;
        const T mx = *std::max_element(row, row + classes);
        double lse = 0.0;
        for (int j = 0; j < classes; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
        loss += std::log(lse) - static_cast<double>(row[y] - mx);
    }
    if (grad != nullptr) {
        grad->assign(probs.begin(), probs.end());
        const T inv_n = T(1) / static_cast<T>(n);
        for (int i = 0; i < n; ++i) {
            (*grad)[static_cast<std::size_t>(i) * classes + labels[i]] -= T(1);
        }
        for (auto& g : *grad) g *= inv_n;
    }
    return static_cast<T>(loss / n);
}

template <class T>
T prototype_loss(std::span<const T> support, std::span<const int> support_labels, std::span<const T> query,
                 std::span<const int> query_labels, int classes, int dim, std::vector<T>* grad_support,
                 std::vector<T>* grad_query) {
    const int ns = static_cast<int>(support_labels.size());
    const int nq = static_cast<int>(query_labels.size());
    std::vector<T> protos(static_cast<std::size_t>(classes) * dim, T(0));
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int i = 0; i < ns; ++i) {
        const int c = support_labels[i];
        ++counts[c];
        kernels::axpy<T>(dim, T(1), support.data() + static_cast<std::size_t>(i) * dim,
                         protos.data() + static_cast<std::size_t>(c) * dim);
    }
    for (int c = 0; c < classes; ++c) {
        if (counts[c] == 0) throw ConfigError("prototype loss: class " + std::to_string(c) + " has no support");
        for (int k = 0; k < dim; ++k) protos[static_cast<std::size_t>(c) * dim + k] /= static_cast<T>(counts[c]);
    }

    std::vector<T> logits(static_cast<std::size_t>(nq) * classes);
    for (int q = 0; q < nq; ++q) {
        for (int c = 0; c < classes; ++c) {
            logits[static_cast<std::size_t>(q) * classes + c] =
                -kernels::squared_distance<T>(query.data() + static_cast<std::size_t>(q) * dim,
                                              protos.data() + static_cast<std::size_t>(c) * dim, dim);
        }
    }
    std::vector<T> dlogits;
    const T loss = softmax_cross_entropy<T>(logits, nq, classes, query_labels, &dlogits);

    if (grad_query != nullptr || grad_support != nullptr) {
        // logit = -|q - p|^2: d/dq = -2 (q - p), d/dp = 2 (q - p)
        std::vector<T> dprotos(protos.size(), T(0));
        if (grad_query != nullptr) grad_query->assign(query.size(), T(0));
        std::vector<T> diff(static_cast<std::size_t>(dim));
        for (int q = 0; q < nq; ++q) {
            const T* qv = query.data() + static_cast<std::size_t>(q) * dim;
            for (int c = 0; c < classes; ++c) {
                const T g = dlogits[static_cast<std::size_t>(q) * classes + c];
                if (g == T(0)) continue;
                const T* pv = protos.data() + static_cast<std::size_t>(c) * dim;
                for (int k = 0; k < dim; ++k) diff[k] = qv[k] - pv[k];
                if (grad_query != nullptr) {
                    kernels::axpy<T>(dim, T(-2) * g, diff.data(), grad_query->data() + static_cast<std::size_t>(q) * dim);
                }
                kernels::axpy<T>(dim, T(2) * g, diff.data(), dprotos.data() + static_cast<std::size_t>(c) * dim);
            }
        }
        if (grad_support != nullptr) {
            grad_support->assign(support.size(), T(0));
            for (int i = 0; i < ns; ++i) {
                const int c = support_labels[i];
                kernels::axpy<T>(dim, T(1) / static_cast<T>(counts[c]), dprotos.data() + static_cast<std::size_t>(c) * dim,
                                 grad_support->data() + static_cast<std::size_t>(i) * dim);
            }
        }
    }
    return loss;
}

template void softmax_rows<float>(std::span<const float>, int, int, std::vector<float>&);
template void softmax_rows<double>(std::span<const double>, int, int, std::vector<double>&);
template float softmax_cross_entropy<float>(std::span<const float>, int, int, std::span<const int>, std::vector<float>*);
template double softmax_cross_entropy<double>(std::span<const double>, int, int, std::span<const int>,
                                              std::vector<double>*);
template float prototype_loss<float>(std::span<const float>, std::span<const int>, std::span<const float>,
                                     std::span<const int>, int, int, std::vector<float>*, std::vector<float>*);
template double prototype_loss<double>(std::span<const double>, std::span<const int>, std::span<const double>,
                                       std::span<const int>, int, int, std::vector<double>*, std::vector<double>*);

}  // namespace cfsl::nn
