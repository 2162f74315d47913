#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ramtsf/blocks.hpp"
#include "ramtsf/tensor.hpp"

namespace ramtsf {

// Task wiring: short-horizon forecasting over a sensor graph (stf) or
// long-horizon forecasting over a small channel set (ltsf).
enum class Task { stf = 1, ltsf = 2 };

// Decoder family: an autoregressive attention decoder or a direct linear
// projection head.
enum class DecoderKind { attention = 1, projection = 2 };

struct EmbeddingConfig {
  bool time_of_day = true;
  bool day_of_week = true;
  bool node = true;
  int64_t steps_per_day = 288;

  bool operator==(const EmbeddingConfig&) const = default;
};

struct ModelConfig {
  Task task = Task::stf;
  DecoderKind decoder = DecoderKind::projection;
  int64_t lookback = 12;  // input steps T
  int64_t horizon = 12;   // output steps H
  int64_t nodes = 1;
  int64_t in_features = 1;
  int64_t out_features = 1;
  int64_t d_model = 64;
  int64_t d_ff = 256;
  int64_t heads = 4;
  std::vector<BlockSpec> temporal_blocks;
  std::vector<BlockSpec> spatial_blocks;
  std::vector<BlockSpec> decoder_blocks;
  EmbeddingConfig embedding;
  double dropout = 0.1;
  uint64_t seed = 1;
  LnPlacement ln_placement = LnPlacement::after_residual;
  bool interleave_encoder = false;

  void validate() const;

  // True when the decoder actually runs attention layers, i.e. teacher-forced
  // training and autoregressive evaluation. A fully pruned (all-mlp) decoder
  // drops to a time-projection followed by position-wise blocks instead,
  // which keeps the encoder-to-output path alive without any attention.
  bool decoder_uses_autoregression() const;

  bool operator==(const ModelConfig&) const = default;
};

// Fills the three stacks with attention blocks derived from the model-level
// widths (temporal/spatial/decoder layer counts).
void populate_stacks(ModelConfig& cfg, int64_t l_t, int64_t l_s, int64_t k_dec);

// The two fixed configurations the headline cost comparisons run on.
ModelConfig reference_stf_config();
ModelConfig reference_ltsf_config();

// Canonical JSON round trip (sorted keys, strict unknown-key rejection) and
// the FNV-1a content hash of the canonical form.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
uint64_t config_hash(const ModelConfig& cfg);
std::string config_hash_hex(const ModelConfig& cfg);

// Per-input-step calendar indices; required by the corresponding embedding
// flags.
struct Calendar {
  std::vector<int64_t> tod;
  std::vector<int64_t> dow;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct CostReport;
class AmtsfmModel;
CostReport measured_cost(AmtsfmModel& model, const Tensor& x, const Calendar& cal);

// The forecasting model: embedding, temporal/spatial encoder stacks, and one
// of the decoder variants. Instances are single-threaded; independent
// instances may run concurrently.
class AmtsfmModel {
 public:
  explicit AmtsfmModel(ModelConfig cfg);
  AmtsfmModel(const AmtsfmModel&) = delete;
  AmtsfmModel& operator=(const AmtsfmModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  Tensor* find_parameter(const std::string& name);
  const Tensor* find_parameter(const std::string& name) const;
  int64_t parameter_count() const;
  void zero_grad();
  Rng& dropout_rng() { return dropout_rng_; }

  // Gate for the runtime operation counter; measured_cost refuses to run
  // while this is off.
  void set_instrumentation(bool on) { instrument_ = on; }
  bool instrumentation() const { return instrument_; }

  // x: [T,N,C] -> [T,N,d_model]
  Tensor embed(const Tensor& x, const Calendar& cal);
  // [T,N,d_model] -> [T,N,d_model]
  Tensor encode(const Tensor& e, RunMode mode);
  // [T,N,d_model] -> [H,N,out_features]; `targets` is required in train mode
  // for autoregressive decoders and must be null otherwise.
  Tensor decode(const Tensor& z, RunMode mode, const Tensor* targets);
  Tensor forward(const Tensor& x, const Calendar& cal, RunMode mode,
                 const Tensor* targets = nullptr);

  // One eval-mode forward for cost probing. Autoregressive decoders run the
  // teacher-forced parallel decode on zero targets so the executed op
  // sequence is fully shape-determined.
  Tensor cost_probe_forward(const Tensor& x, const Calendar& cal);

 private:
  struct DecoderTensors {
    Tensor start;            // [d_model]
    Tensor w_in, b_in;       // out_features -> d_model
    Tensor time_proj;        // [T, H]
    Tensor w_out, b_out;     // d_model -> out_features
  };

  Tensor& add_param(const std::string& name, Shape shape, int init_kind, Rng& rng);
  MhaParams make_mha(const std::string& prefix, Rng& rng);
  BlockParams make_block_params(const std::string& prefix, const BlockSpec& spec,
                                bool is_decoder, Rng& rng);
  Tensor run_temporal_layer(const Tensor& e, size_t layer, RunMode mode);
  Tensor run_spatial_layer(const Tensor& e, size_t layer, RunMode mode);
  Tensor decode_projection(const Tensor& z);
  Tensor decode_mlp(const Tensor& z, RunMode mode);
  Tensor decode_attention(const Tensor& z, const Tensor* targets, bool teacher, RunMode mode);
  Tensor decoder_stack(const Tensor& y0, const Tensor& memory, RunMode mode);

  friend CostReport measured_cost(AmtsfmModel& model, const Tensor& x, const Calendar& cal);

  ModelConfig cfg_;
  std::vector<NamedParam> params_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<BlockParams> temporal_params_;
  std::vector<BlockParams> spatial_params_;
  std::vector<BlockParams> decoder_params_;
  Tensor w_in_, b_in_;
  Tensor tod_table_, dow_table_, node_table_;
  DecoderTensors dec_;
  Rng dropout_rng_;
  bool instrument_ = false;
};

}  // namespace ramtsf
