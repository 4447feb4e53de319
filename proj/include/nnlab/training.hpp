#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nnlab/data.hpp"
#include "nnlab/models.hpp"
#include "nnlab/optim.hpp"
#include "nnlab/tensor.hpp"

namespace nnlab {

struct TrainConfig {
    LabeledDataset train;
    LabeledDataset test;
    ArchitectureDescriptor arch;
    int epochs = 100;
    int batch_size = 128;
    OptimizerConfig opt = OptimizerConfig::sgd(0.01, 0.9, 0.0);
    AugmentationPolicy aug;
    std::uint64_t seed = 1; // drives batch shuffling and augmentation draws
    bool track_input_gradients = true;

    void validate() const;
    std::string echo_text() const; // canonical config echo for sidecars
};

struct EpochRecord {
    int epoch = 0; // 1-based
    double train_acc = 0.0;
    double test_acc = 0.0;
    double loss = 0.0;  // mean cross-entropy over the epoch's training pass
    double g_bar = 0.0; // mean per-sample input-gradient magnitude
};

struct TrainingReport {
    std::vector<EpochRecord> epochs;
    std::string config_echo;
};

// G(x_i) = sum_j |dL/dx_ij| where L is the mean batch cross-entropy rescaled
// by the batch size, so each value reflects the sample's own loss gradient.
// The weight-decay term never enters (its input gradient is zero).
std::vector<double> input_gradient_magnitude(const Network& net, const Tensor& inputs,
                                             const std::vector<int>& labels);

std::pair<Network, TrainingReport> train_classifier(const TrainConfig& cfg);

double accuracy(const Network& net, const LabeledDataset& ds, int batch_size = 256);

struct GanConfig {
    LabeledDataset data;
    ArchitectureDescriptor gen;
    ArchitectureDescriptor disc;
    int epochs = 30;
    int batch_size = 64;
    double lr = 2e-4;  // Adam, DCGAN convention
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 1;

    void validate() const;
    std::string echo_text() const;
};

struct GanEpochRecord {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double d_acc = 0.0; // real-vs-fake accuracy on held-out probe batches
};

struct GanReport {
    std::vector<GanEpochRecord> epochs;
    std::string config_echo;
};

struct GanResult {
    Network generator;
    Network discriminator;
    GanReport report;
};

GanResult train_gan(const GanConfig& cfg);

// CSV with header epoch,train_acc,test_acc,loss,g_bar plus a sidecar
// config echo at <path>.config.
void write_training_report_csv(const TrainingReport& rep, const std::string& path);
TrainingReport read_training_report_csv(const std::string& path);

void write_gan_report_csv(const GanReport& rep, const std::string& path);

} // namespace nnlab
