#pragma once

#include "common.hpp"

#include "texbank/model_io.hpp"

#include <CLI11.hpp>

#include <functional>
#include <vector>

namespace texbank::cli {

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

Encoder encoder_for(const ModelBundle& vocab, const EncoderSettings& settings);

/// Whitens when the vocabulary carries a whitener, encodes (with spatial
/// pooling if configured) and post-processes.
EncodedVector encode_item(const DescriptorSample& sample, const ModelBundle& vocab, const Encoder& encoder,
                          const EncoderSettings& settings);

Command add_extract(CLI::App& app, const Globals& g);
Command add_fit_vocab(CLI::App& app, const Globals& g);
Command add_encode(CLI::App& app, const Globals& g);
Command add_train(CLI::App& app, const Globals& g);
Command add_predict(CLI::App& app, const Globals& g);
Command add_evaluate(CLI::App& app, const Globals& g);
Command add_segment(CLI::App& app, const Globals& g);
Command add_annosim(CLI::App& app, const Globals& g);

}  // namespace texbank::cli
