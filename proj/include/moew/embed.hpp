#pragma once

#include "moew/data.hpp"
#include "moew/nn.hpp"

namespace moew {

struct AutoencoderConfig {
    /// Encoder hidden widths; the decoder mirrors them.
    std::vector<int> hidden;
    int dim = 2;
    double lambda = 0.5;
    TrainConfig train;

    void validate() const;
};

enum class EmbedderKind { autoencoder, label_passthrough };

/// Maps (x, y) to a centered d-dimensional code.
class Embedder {
public:
    EmbedderKind kind = EmbedderKind::autoencoder;
    ModelParams encoder;           // autoencoder only; last layer is the sigmoid code layer
    LabelKind label_kind = LabelKind::regression;
    int num_classes = 0;
    Vector offsets;                // train-set mean of the raw code

    int dim() const { return static_cast<int>(offsets.size()); }

    /// Centered code for a single pair.
    Vector embed(const Vector& x, double y) const;
    /// Centered codes for every row, n x d.
    Matrix embed(const Matrix& features, const Vector& labels) const;
    Matrix embed(const Dataset& ds) const { return embed(ds.features, ds.labels); }

    /// Uncentered codes. Autoencoder codes lie in (0,1).
    Matrix raw(const Matrix& features, const Vector& labels) const;
};

/// Encoder input: features followed by the label encoding (raw real, +-1, or one-hot).
Matrix autoencoder_inputs(const Matrix& features, const Vector& labels, LabelKind kind, int num_classes);
int label_encoding_width(LabelKind kind, int num_classes);

struct AutoencoderFit {
    Embedder embedder;
    ModelParams network;      // full encoder + decoder
    double feature_loss = 0;  // mean over rows of the per-row feature reconstruction loss
    double label_loss = 0;    // mean over rows of the label reconstruction loss
};

/// Minimizes lambda * L_x + (1 - lambda) * L_y over the training pairs.
AutoencoderFit fit_autoencoder(const Dataset& train_set, const AutoencoderConfig& cfg);
Embedder train_autoencoder(const Dataset& train_set, const AutoencoderConfig& cfg);

/// Reconstruction of (features, label encoding) by a full autoencoder network.
Matrix reconstruct(const ModelParams& network, const Matrix& features, const Vector& labels, LabelKind kind,
                   int num_classes);

/// One-hot class code centered by the training class frequencies.
Embedder label_passthrough_embedder(const Dataset& train_set);

} // namespace moew
