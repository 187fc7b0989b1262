#pragma once

// Small convolutional network: `stages` x (3x3 conv, batch norm, ReLU,
// 2x2 max pool) followed by an optional linear head. Templated on the
// scalar type so gradient checks can run in double precision; float is the
// production type and goes through the dispatched SIMD kernels.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfsl/rng.hpp"

namespace cfsl::nn {

struct NetShape {
    int image_size = 28;
    int filters = 64;
    int stages = 3;

    bool operator==(const NetShape&) const = default;
};

// Spatial side after `stages` halvings (floor), or 0 if it collapses.
int output_side(const NetShape& shape);
int embedding_dim(const NetShape& shape);

// batch: normalize with batch statistics and update running averages.
// frozen: normalize with the running averages (pure affine per channel).
enum class BnMode { batch, frozen };

template <class T>
struct ParamRef {
    std::string name;
    std::span<T> value;
    std::span<T> grad;
};

template <class T>
class ConvNet {
public:
    ConvNet() = default;
    ConvNet(const NetShape& shape, std::uint64_t seed);

    const NetShape& shape() const { return shape_; }
    int embedding_dim() const { return nn::embedding_dim(shape_); }
    int head_outputs() const { return head_outputs_; }
    bool has_head() const { return head_outputs_ > 0; }
    int output_dim() const { return has_head() ? head_outputs_ : embedding_dim(); }

    // Replaces the head with `outputs` units. Zero weights when rng is null,
    // otherwise N(0, scale^2).
    void reset_head(int outputs, Rng* rng = nullptr, T scale = T(0.01));
    void drop_head();

    struct StageCache {
        std::vector<T> input;   // n x cin x S x S
        std::vector<T> xhat;    // n x F x S x S
        std::vector<T> y;       // post-BN, pre-ReLU
        std::vector<T> invstd;  // per channel
        std::vector<int> argmax;
    };
    struct Cache {
        int n = 0;
        BnMode mode = BnMode::frozen;
        std::vector<StageCache> stages;
        std::vector<T> features;  // n x D
    };

    // input: n images of image_size^2 values. out: n x output_dim().
    // Batch mode updates the running statistics.
    void forward(std::span<const T> input, int n, BnMode mode, std::vector<T>& out, Cache* cache = nullptr);

    // Accumulates parameter gradients for d(loss)/d(out).
    void backward(const Cache& cache, std::span<const T> grad_out);

    void zero_grad();
    void sgd_step(T lr);

    std::vector<ParamRef<T>> params();
    std::size_t param_count() const;

    // Body = every stage's conv weights, BN affine and running statistics.
    std::vector<T> body_state() const;
    void load_body_state(std::span<const T> state);
    std::vector<T> head_state() const;
    void load_head_state(int outputs, std::span<const T> state);

    std::uint64_t body_hash() const;

private:
    struct Stage {
        int cin = 1;
        int side = 0;  // input side
        std::vector<T> w, gw;
        std::vector<T> gamma, ggamma, beta, gbeta;
        std::vector<T> run_mean, run_var;
    };

    void stage_forward(Stage& st, std::span<const T> in, int n, BnMode mode, std::vector<T>& out, StageCache* sc);
    void stage_backward(Stage& st, const StageCache& sc, int n, BnMode mode, std::span<const T> grad_out,
                        std::vector<T>* grad_in);

    NetShape shape_;
    std::vector<Stage> stages_;
    int head_outputs_ = 0;
    std::vector<T> hw_, ghw_, hb_, ghb_;
};

extern template class ConvNet<float>;
extern template class ConvNet<double>;

// Mean softmax cross-entropy over the batch; writes d(loss)/d(logits).
template <class T>
T softmax_cross_entropy(std::span<const T> logits, int n, int classes, std::span<const int> labels,
                        std::vector<T>* grad);

template <class T>
void softmax_rows(std::span<const T> logits, int n, int classes, std::vector<T>& probs);

// Prototypical loss: prototypes are per-class means of the support
// embeddings, logits are negative squared distances of each query to each
// prototype, loss is mean cross-entropy. Labels index classes 0..classes-1.
template <class T>
T prototype_loss(std::span<const T> support, std::span<const int> support_labels, std::span<const T> query,
                 std::span<const int> query_labels, int classes, int dim, std::vector<T>* grad_support,
                 std::vector<T>* grad_query);

}  // namespace cfsl::nn
