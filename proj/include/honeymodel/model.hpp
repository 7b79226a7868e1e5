#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "honeymodel/errors.hpp"
#include "honeymodel/rng.hpp"
#include "honeymodel/tensor.hpp"

namespace honeymodel {

enum class LayerKind : std::uint8_t { Affine = 0, Relu = 1, Softmax = 2 };

struct LayerSpec {
    LayerKind kind;
    std::size_t in = 0;  // affine only
    std::size_t out = 0; // affine only
};

struct AffineParams {
    std::vector<double> weights; // out x in, row-major
    std::vector<double> bias;    // out
};

/// Layered feed-forward classifier. Layer dimensions must chain and the
/// final layer is a softmax over numClasses logits.
struct Model {
    std::vector<LayerSpec> layers;
    std::vector<AffineParams> params; // one entry per affine layer, in order
    std::size_t inputDim = 0;
    std::size_t numClasses = 0;

    void validate() const {
        if (layers.empty() || layers.back().kind != LayerKind::Softmax)
            throw ShapeError("model must end in a softmax layer");
        std::size_t width = inputDim;
        std::size_t affineCount = 0;
        for (const LayerSpec& l : layers) {
            switch (l.kind) {
            case LayerKind::Affine:
                if (l.in != width)
                    throw ShapeError("affine layer input width " + std::to_string(l.in) +
                                     " does not chain with " + std::to_string(width));
                ++affineCount;
                width = l.out;
                break;
            case LayerKind::Relu:
            case LayerKind::Softmax:
                break;
            }
        }
        if (width != numClasses)
            throw ShapeError("final layer width does not equal numClasses");
        if (params.size() != affineCount)
            throw ShapeError("parameter blocks do not match affine layer count");
        std::size_t p = 0;
        width = inputDim;
        for (const LayerSpec& l : layers) {
            if (l.kind != LayerKind::Affine) continue;
            if (params[p].weights.size() != l.in * l.out || params[p].bias.size() != l.out)
                throw ShapeError("parameter block " + std::to_string(p) + " has wrong size");
            ++p;
        }
    }

    std::size_t parameterCount() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.weights.size() + p.bias.size();
        return n;
    }
};

namespace detail {

// out[b,:] = bias + W * in[b,:]  with W stored out x in row-major.
inline void affineForward(const double* in, std::size_t batch, const AffineParams& p,
                          std::size_t nIn, std::size_t nOut, double* out) {
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in + b * nIn;
        double* y = out + b * nOut;
        for (std::size_t o = 0; o < nOut; ++o) {
            const double* w = p.weights.data() + o * nIn;
            double acc = p.bias[o];
            for (std::size_t i = 0; i < nIn; ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
    }
}

// dIn[b,:] = W^T * dOut[b,:]
inline void affineBackwardInput(const double* dOut, std::size_t batch, const AffineParams& p,
                                std::size_t nIn, std::size_t nOut, double* dIn) {
    std::fill(dIn, dIn + batch * nIn, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* dy = dOut + b * nOut;
        double* dx = dIn + b * nIn;
        for (std::size_t o = 0; o < nOut; ++o) {
            const double g = dy[o];
            if (g == 0.0) continue;
            const double* w = p.weights.data() + o * nIn;
            for (std::size_t i = 0; i < nIn; ++i) dx[i] += g * w[i];
        }
    }
}

// dW[o,:] += sum_b dOut[b,o] * in[b,:];  db[o] += sum_b dOut[b,o]
inline void affineBackwardParams(const double* in, const double* dOut, std::size_t batch,
                                 std::size_t nIn, std::size_t nOut, AffineParams& grad) {
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in + b * nIn;
        const double* dy = dOut + b * nOut;
        for (std::size_t o = 0; o < nOut; ++o) {
            const double g = dy[o];
            if (g == 0.0) continue;
            grad.bias[o] += g;
            double* dw = grad.weights.data() + o * nIn;
            for (std::size_t i = 0; i < nIn; ++i) dw[i] += g * x[i];
        }
    }
}

inline void softmaxRow(const double* z, std::size_t n, double* p) {
    double m = z[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
}

} // namespace detail

/// Per-layer activations kept from a forward pass so gradients can be
/// replayed backwards. activations[0] is the input batch; the entry before
/// the softmax layer holds the logits.
struct ForwardTrace {
    std::vector<Tensor> activations;
    std::size_t batch = 0;

    const Tensor& logits() const { return activations[activations.size() - 2]; }
    const Tensor& probabilities() const { return activations.back(); }
};

inline ForwardTrace forwardTrace(const Model& model, const Tensor& batch) {
    if (batch.shape.size() != 2 || batch.cols() != model.inputDim)
        throw ShapeError("forward: batch dimension " + std::to_string(batch.cols()) +
                         " does not match model input " + std::to_string(model.inputDim));
    ForwardTrace trace;
    trace.batch = batch.rows();
    trace.activations.reserve(model.layers.size() + 1);
    trace.activations.push_back(batch);

    std::size_t p = 0;
    for (const LayerSpec& l : model.layers) {
        const Tensor& cur = trace.activations.back();
        switch (l.kind) {
        case LayerKind::Affine: {
            Tensor next = Tensor::zeros({trace.batch, l.out});
            detail::affineForward(cur.values.data(), trace.batch, model.params[p], l.in, l.out,
                                  next.values.data());
            trace.activations.push_back(std::move(next));
            ++p;
            break;
        }
        case LayerKind::Relu: {
            Tensor next = cur;
            for (double& v : next.values) v = v > 0.0 ? v : 0.0;
            trace.activations.push_back(std::move(next));
            break;
        }
        case LayerKind::Softmax: {
            Tensor next = Tensor::zeros(cur.shape);
            for (std::size_t b = 0; b < trace.batch; ++b)
                detail::softmaxRow(cur.rowPtr(b), cur.cols(), next.rowPtr(b));
            trace.activations.push_back(std::move(next));
            break;
        }
        }
    }
    return trace;
}

/// Class probabilities for a batch. Rows sum to one.
inline Tensor forward(const Model& model, const Tensor& batch) {
    ForwardTrace trace = forwardTrace(model, batch);
    requireFinite(trace.probabilities(), "forward probabilities");
    return trace.probabilities();
}

inline Tensor forwardLogits(const Model& model, const Tensor& batch) {
    ForwardTrace trace = forwardTrace(model, batch);
    requireFinite(trace.logits(), "forward logits");
    return trace.logits();
}

inline int argmaxRow(const Tensor& t, std::size_t r) {
    const double* row = t.rowPtr(r);
    int best = 0;
    for (std::size_t c = 1; c < t.cols(); ++c)
        if (row[c] > row[best]) best = static_cast<int>(c);
    return best;
}

inline int predictClass(const Model& model, const std::vector<double>& sample) {
    Tensor batch({1, sample.size()}, sample);
    Tensor probs = forward(model, batch);
    return argmaxRow(probs, 0);
}

/// Reverse pass from a gradient seeded at the logits. Optionally accumulates
/// parameter gradients; returns the gradient at the input batch.
inline Tensor backwardFromLogits(const Model& model, const ForwardTrace& trace,
                                 const Tensor& dLogits, std::vector<AffineParams>* paramGrads) {
    if (dLogits.rows() != trace.batch || dLogits.cols() != model.numClasses)
        throw ShapeError("backward: logit gradient has wrong shape");
    // Walk layers backwards, skipping the softmax (the seed is already in
    // logit space).
    Tensor grad = dLogits;
    std::size_t p = model.params.size();
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const LayerSpec& l = model.layers[li];
        const Tensor& input = trace.activations[li];
        switch (l.kind) {
        case LayerKind::Softmax:
            break;
        case LayerKind::Relu: {
            for (std::size_t i = 0; i < grad.values.size(); ++i)
                if (input.values[i] <= 0.0) grad.values[i] = 0.0;
            break;
        }
        case LayerKind::Affine: {
            --p;
            if (paramGrads)
                detail::affineBackwardParams(input.values.data(), grad.values.data(), trace.batch,
                                             l.in, l.out, (*paramGrads)[p]);
            Tensor dIn = Tensor::zeros({trace.batch, l.in});
            detail::affineBackwardInput(grad.values.data(), trace.batch, model.params[p], l.in,
                                        l.out, dIn.values.data());
            grad = std::move(dIn);
            break;
        }
        }
    }
    return grad;
}

inline std::vector<AffineParams> zeroParamGrads(const Model& model) {
    std::vector<AffineParams> grads;
    grads.reserve(model.params.size());
    for (const auto& p : model.params)
        grads.push_back({std::vector<double>(p.weights.size(), 0.0),
                         std::vector<double>(p.bias.size(), 0.0)});
    return grads;
}

/// Mean cross-entropy over the batch plus parameter gradients.
inline std::pair<double, std::vector<AffineParams>> lossAndParamGrads(const Model& model,
                                                                      const Tensor& batch,
                                                                      const std::vector<int>& labels) {
    if (labels.size() != batch.rows())
        throw ShapeError("lossAndParamGrads: label count does not match batch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= model.numClasses)
            throw InputError("label out of range: " + std::to_string(l));

    ForwardTrace trace = forwardTrace(model, batch);
    const Tensor& logits = trace.logits();
    const std::size_t batchSize = trace.batch;
    const std::size_t classes = model.numClasses;

    double loss = 0.0;
    Tensor dLogits = Tensor::zeros({batchSize, classes});
    for (std::size_t b = 0; b < batchSize; ++b) {
        const double* z = logits.rowPtr(b);
        double m = z[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - m);
        const double logSumExp = m + std::log(sum);
        loss += logSumExp - z[static_cast<std::size_t>(labels[b])];
        double* d = dLogits.rowPtr(b);
        for (std::size_t c = 0; c < classes; ++c)
            d[c] = std::exp(z[c] - logSumExp) / static_cast<double>(batchSize);
        d[static_cast<std::size_t>(labels[b])] -= 1.0 / static_cast<double>(batchSize);
    }
    loss = std::max(0.0, loss / static_cast<double>(batchSize));

    std::vector<AffineParams> grads = zeroParamGrads(model);
    backwardFromLogits(model, trace, dLogits, &grads);
    for (const auto& g : grads) {
        requireFinite(g.weights, "parameter gradient");
        requireFinite(g.bias, "parameter gradient");
    }
    return {loss, std::move(grads)};
}

/// Gradient of the cross-entropy loss toward `lossTarget` with respect to the
/// input sample.
inline std::vector<double> inputGrad(const Model& model, const std::vector<double>& sample,
                                     int lossTarget) {
    if (sample.size() != model.inputDim)
        throw ShapeError("inputGrad: sample dimension does not match model");
    if (lossTarget < 0 || static_cast<std::size_t>(lossTarget) >= model.numClasses)
        throw InputError("inputGrad: target label out of range");
    Tensor batch({1, sample.size()}, sample);
    ForwardTrace trace = forwardTrace(model, batch);
    Tensor dLogits = Tensor::zeros({1, model.numClasses});
    const Tensor& probs = trace.probabilities();
    for (std::size_t c = 0; c < model.numClasses; ++c) dLogits.values[c] = probs.values[c];
    dLogits.values[static_cast<std::size_t>(lossTarget)] -= 1.0;
    Tensor g = backwardFromLogits(model, trace, dLogits, nullptr);
    requireFinite(g, "input gradient");
    return g.values;
}

/// Gradient of seed . logits with respect to the input; used by attacks that
/// steer individual logits.
inline std::vector<double> inputGradFromLogitSeed(const Model& model,
                                                  const std::vector<double>& sample,
                                                  const std::vector<double>& seed,
                                                  ForwardTrace* traceOut = nullptr) {
    if (sample.size() != model.inputDim)
        throw ShapeError("inputGradFromLogitSeed: sample dimension does not match model");
    if (seed.size() != model.numClasses)
        throw ShapeError("inputGradFromLogitSeed: seed length does not match class count");
    Tensor batch({1, sample.size()}, sample);
    ForwardTrace trace = forwardTrace(model, batch);
    Tensor dLogits({1, seed.size()}, seed);
    Tensor g = backwardFromLogits(model, trace, dLogits, nullptr);
    if (traceOut) *traceOut = std::move(trace);
    return g.values;
}

/// Fully connected stack: affine+relu per hidden width, then affine+softmax.
inline Model makeMlp(std::size_t inputDim, const std::vector<std::size_t>& hidden,
                     std::size_t numClasses, std::uint64_t seed) {
    Model m;
    m.inputDim = inputDim;
    m.numClasses = numClasses;
    Rng rng(deriveSeed(seed, "init"));
    std::size_t width = inputDim;
    std::vector<std::size_t> widths(hidden);
    widths.push_back(numClasses);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        std::size_t out = widths[i];
        m.layers.push_back({LayerKind::Affine, width, out});
        AffineParams p;
        p.weights.resize(width * out);
        p.bias.assign(out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(width + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : p.weights) w = dist(rng);
        m.params.push_back(std::move(p));
        if (i + 1 < widths.size()) m.layers.push_back({LayerKind::Relu});
        width = out;
    }
    m.layers.push_back({LayerKind::Softmax});
    m.validate();
    return m;
}

inline Model makeDefaultMnistMlp(std::uint64_t seed) { return makeMlp(784, {256, 128}, 10, seed); }

// ---------------------------------------------------------------------------
// Model container format ("HNYM"): see README for the byte layout.
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'H', 'N', 'Y', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

namespace detail {

inline void writeU32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t readU32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError(path + ": truncated model file");
    return v;
}

inline void writeDoubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void readDoubles(std::istream& in, std::vector<double>& v, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double))))
        throw FormatError(path + ": truncated parameter block");
}

inline void writeString(std::ostream& out, const std::string& s) {
    writeU32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string readString(std::istream& in, const std::string& path) {
    std::uint32_t n = readU32(in, path);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw FormatError(path + ": truncated string field");
    return s;
}

} // namespace detail

/// Serialize a model, stamping it with the SHA-256 fingerprint of the secret
/// key file it belongs to (empty string when key-less).
inline void saveModel(const Model& model, const std::string& path, const std::string& keyFingerprint) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path);
    out.write(kModelMagic, 4);
    detail::writeU32(out, kModelFormatVersion);
    detail::writeString(out, keyFingerprint);
    detail::writeU32(out, static_cast<std::uint32_t>(model.inputDim));
    detail::writeU32(out, static_cast<std::uint32_t>(model.numClasses));
    detail::writeU32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const LayerSpec& l : model.layers) {
        out.put(static_cast<char>(l.kind));
        detail::writeU32(out, static_cast<std::uint32_t>(l.in));
        detail::writeU32(out, static_cast<std::uint32_t>(l.out));
    }
    for (const AffineParams& p : model.params) {
        detail::writeDoubles(out, p.weights);
        detail::writeDoubles(out, p.bias);
    }
    if (!out) throw IoError("failed writing model file: " + path);
}

struct LoadedModel {
    Model model;
    std::string keyFingerprint;
};

inline LoadedModel loadModel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
        throw FormatError(path + ": bad magic at offset 0 (expected HNYM)");
    std::uint32_t version = detail::readU32(in, path);
    if (version != kModelFormatVersion)
        throw FormatError(path + ": unsupported format version " + std::to_string(version));
    LoadedModel lm;
    lm.keyFingerprint = detail::readString(in, path);
    lm.model.inputDim = detail::readU32(in, path);
    lm.model.numClasses = detail::readU32(in, path);
    std::uint32_t layerCount = detail::readU32(in, path);
    for (std::uint32_t i = 0; i < layerCount; ++i) {
        int kindByte = in.get();
        if (kindByte < 0) throw FormatError(path + ": truncated layer table");
        if (kindByte > 2) throw FormatError(path + ": unknown layer kind " + std::to_string(kindByte));
        LayerSpec l;
        l.kind = static_cast<LayerKind>(kindByte);
        l.in = detail::readU32(in, path);
        l.out = detail::readU32(in, path);
        lm.model.layers.push_back(l);
    }
    for (const LayerSpec& l : lm.model.layers) {
        if (l.kind != LayerKind::Affine) continue;
        AffineParams p;
        p.weights.resize(l.in * l.out);
        p.bias.resize(l.out);
        detail::readDoubles(in, p.weights, path);
        detail::readDoubles(in, p.bias, path);
        lm.model.params.push_back(std::move(p));
    }
    lm.model.validate();
    return lm;
}

} // namespace honeymodel
