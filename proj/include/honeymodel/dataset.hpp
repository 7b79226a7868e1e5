#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "honeymodel/errors.hpp"
#include "honeymodel/rng.hpp"
#include "honeymodel/tensor.hpp"

namespace honeymodel {

/// Flat feature vectors in [0,1] with integer class labels. poisonedMask
/// records which samples were altered by the poisoning step.
struct LabeledDataset {
    Tensor samples;                    // N x D
    std::vector<int> labels;           // N entries in [0, numClasses)
    std::vector<std::uint8_t> poisonedMask; // N entries, default all false
    std::size_t numClasses = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t featureDim() const { return samples.cols(); }

    void validate() const {
        if (samples.shape.size() != 2)
            throw ShapeError("dataset samples must be rank 2");
        if (samples.rows() != labels.size() || poisonedMask.size() != labels.size())
            throw ShapeError("dataset field lengths disagree");
        if (numClasses < 1) throw InputError("dataset needs at least one class");
        for (int l : labels)
            if (l < 0 || static_cast<std::size_t>(l) >= numClasses)
                throw InputError("label out of range: " + std::to_string(l));
        for (double v : samples.values)
            if (!(v >= 0.0 && v <= 1.0))
                throw InputError("feature outside [0,1]: " + std::to_string(v));
    }
};

namespace detail {

inline std::uint32_t readBigEndianU32(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated at offset " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void writeBigEndianU32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

/// Load an IDX image/label file pair (the raw MNIST distribution format,
/// gzip-decompressed). Pixels are scaled by 1/255 into [0,1].
inline LabeledDataset loadIdx(const std::string& imagesPath, const std::string& labelsPath) {
    std::ifstream img(imagesPath, std::ios::binary);
    if (!img) throw IoError("cannot open images file: " + imagesPath);
    std::ifstream lab(labelsPath, std::ios::binary);
    if (!lab) throw IoError("cannot open labels file: " + labelsPath);

    std::uint32_t imagesMagic = detail::readBigEndianU32(img, imagesPath, 0);
    if (imagesMagic != kIdxImagesMagic)
        throw FormatError(imagesPath + ": bad magic " + std::to_string(imagesMagic) +
                          " at offset 0 (expected " + std::to_string(kIdxImagesMagic) + ")");
    std::uint32_t imageCount = detail::readBigEndianU32(img, imagesPath, 4);
    std::uint32_t numRows = detail::readBigEndianU32(img, imagesPath, 8);
    std::uint32_t numCols = detail::readBigEndianU32(img, imagesPath, 12);

    std::uint32_t labelsMagic = detail::readBigEndianU32(lab, labelsPath, 0);
    if (labelsMagic != kIdxLabelsMagic)
        throw FormatError(labelsPath + ": bad magic " + std::to_string(labelsMagic) +
                          " at offset 0 (expected " + std::to_string(kIdxLabelsMagic) + ")");
    std::uint32_t labelCount = detail::readBigEndianU32(lab, labelsPath, 4);

    if (imageCount != labelCount)
        throw FormatError(imagesPath + ": image count " + std::to_string(imageCount) +
                          " does not match label count " + std::to_string(labelCount));

    const std::size_t dim = std::size_t(numRows) * numCols;
    LabeledDataset ds;
    ds.samples = Tensor::zeros({imageCount, dim});
    ds.labels.resize(imageCount);
    ds.poisonedMask.assign(imageCount, 0);

    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < imageCount; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
            throw FormatError(imagesPath + ": truncated at offset " +
                              std::to_string(16 + std::size_t(i) * dim));
        double* row = ds.samples.rowPtr(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
    }

    std::vector<unsigned char> rawLabels(labelCount);
    if (!lab.read(reinterpret_cast<char*>(rawLabels.data()), labelCount))
        throw FormatError(labelsPath + ": truncated at offset 8");

    int maxLabel = 0;
    for (std::uint32_t i = 0; i < labelCount; ++i) {
        ds.labels[i] = rawLabels[i];
        maxLabel = std::max(maxLabel, ds.labels[i]);
    }
    ds.numClasses = static_cast<std::size_t>(maxLabel) + 1;
    ds.validate();
    return ds;
}

/// Write a dataset back to the IDX pair encoding. Features are quantized to
/// bytes with round-to-nearest, so values of the form k/255 round-trip
/// bit-identically.
inline void saveIdx(const LabeledDataset& ds, const std::string& imagesPath,
                    const std::string& labelsPath, std::uint32_t numRows, std::uint32_t numCols) {
    if (std::size_t(numRows) * numCols != ds.featureDim())
        throw ShapeError("saveIdx: rows*cols does not match feature dimension");
    std::ofstream img(imagesPath, std::ios::binary);
    if (!img) throw IoError("cannot write images file: " + imagesPath);
    detail::writeBigEndianU32(img, kIdxImagesMagic);
    detail::writeBigEndianU32(img, static_cast<std::uint32_t>(ds.size()));
    detail::writeBigEndianU32(img, numRows);
    detail::writeBigEndianU32(img, numCols);
    std::vector<unsigned char> buf(ds.featureDim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.samples.rowPtr(i);
        for (std::size_t j = 0; j < buf.size(); ++j)
            buf[j] = static_cast<unsigned char>(std::lround(row[j] * 255.0));
        img.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }

    std::ofstream lab(labelsPath, std::ios::binary);
    if (!lab) throw IoError("cannot write labels file: " + labelsPath);
    detail::writeBigEndianU32(lab, kIdxLabelsMagic);
    detail::writeBigEndianU32(lab, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

/// Seeded Gaussian blobs around well-separated class centers, clipped to
/// [0,1]. Fast substrate for tests that must not depend on real data.
inline LabeledDataset syntheticBlobs(std::size_t numPerClass, std::size_t dims,
                                     std::size_t classCount, double separation,
                                     std::uint64_t seed) {
    if (dims < 1) throw InputError("syntheticBlobs: dims must be >= 1");
    if (separation <= 0.0) throw InputError("syntheticBlobs: separation must be > 0");
    if (classCount < 1 || numPerClass < 1)
        throw InputError("syntheticBlobs: empty class layout");

    Rng rng(deriveSeed(seed, "blobs"));
    std::uniform_real_distribution<double> centerDist(0.15, 0.85);

    // Best-of-many center placement: keep the configuration with the largest
    // minimum pairwise distance.
    std::vector<double> centers;
    double bestMinDist = -1.0;
    for (int attempt = 0; attempt < 256; ++attempt) {
        std::vector<double> cand(classCount * dims);
        for (double& v : cand) v = centerDist(rng);
        double minDist = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < classCount; ++a)
            for (std::size_t b = a + 1; b < classCount; ++b) {
                double d2 = 0;
                for (std::size_t j = 0; j < dims; ++j) {
                    double diff = cand[a * dims + j] - cand[b * dims + j];
                    d2 += diff * diff;
                }
                minDist = std::min(minDist, std::sqrt(d2));
            }
        if (classCount == 1) minDist = 1.0;
        if (minDist > bestMinDist) {
            bestMinDist = minDist;
            centers = std::move(cand);
        }
        if (bestMinDist >= separation) break;
    }

    const double sigma = separation / 8.0;
    std::normal_distribution<double> noise(0.0, sigma);

    LabeledDataset ds;
    ds.numClasses = classCount;
    ds.samples = Tensor::zeros({numPerClass * classCount, dims});
    ds.labels.resize(numPerClass * classCount);
    ds.poisonedMask.assign(numPerClass * classCount, 0);
    std::size_t idx = 0;
    for (std::size_t c = 0; c < classCount; ++c) {
        for (std::size_t k = 0; k < numPerClass; ++k, ++idx) {
            double* row = ds.samples.rowPtr(idx);
            for (std::size_t j = 0; j < dims; ++j)
                row[j] = std::clamp(centers[c * dims + j] + noise(rng), 0.0, 1.0);
            ds.labels[idx] = static_cast<int>(c);
        }
    }
    ds.validate();
    return ds;
}

/// Subset by index list, preserving order.
inline LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.numClasses = ds.numClasses;
    out.samples = Tensor::zeros({indices.size(), ds.featureDim()});
    out.labels.resize(indices.size());
    out.poisonedMask.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::size_t s = indices[i];
        std::copy(ds.samples.rowPtr(s), ds.samples.rowPtr(s) + ds.featureDim(), out.samples.rowPtr(i));
        out.labels[i] = ds.labels[s];
        out.poisonedMask[i] = ds.poisonedMask[s];
    }
    return out;
}

/// Stratified shuffle/split: per-class test counts stay within one sample of
/// proportional. Partition is disjoint, exhaustive and seed-deterministic.
inline std::pair<LabeledDataset, LabeledDataset> shuffleSplit(const LabeledDataset& ds,
                                                              double testFraction,
                                                              std::uint64_t seed) {
    if (!(testFraction > 0.0 && testFraction < 1.0))
        throw InputError("shuffleSplit: testFraction must lie strictly between 0 and 1");
    Rng rng(deriveSeed(seed, "split"));

    std::vector<std::vector<std::size_t>> byClass(ds.numClasses);
    for (std::size_t i = 0; i < ds.size(); ++i)
        byClass[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    std::vector<std::size_t> testIdx, trainIdx;
    for (auto& classIndices : byClass) {
        std::shuffle(classIndices.begin(), classIndices.end(), rng);
        std::size_t nTest = static_cast<std::size_t>(
            std::floor(testFraction * static_cast<double>(classIndices.size()) + 0.5));
        for (std::size_t k = 0; k < classIndices.size(); ++k)
            (k < nTest ? testIdx : trainIdx).push_back(classIndices[k]);
    }
    std::shuffle(testIdx.begin(), testIdx.end(), rng);
    std::shuffle(trainIdx.begin(), trainIdx.end(), rng);
    if (trainIdx.empty() || testIdx.empty())
        throw InputError("shuffleSplit: a split came out empty");
    return {subset(ds, trainIdx), subset(ds, testIdx)};
}

} // namespace honeymodel
