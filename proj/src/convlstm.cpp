#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "head3d/canonical.hpp"

namespace head3d {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr const char* kFormatTag = "head3d-convlstm";

}  // namespace

ConvLSTMCell::ConvLSTMCell(int kernel, int input_channels, int hidden_channels)
    : kernel_(kernel), input_channels_(input_channels), hidden_channels_(hidden_channels) {
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("ConvLSTMCell: kernel must be odd");
  if (input_channels < 1 || hidden_channels < 1) throw std::invalid_argument("ConvLSTMCell: channels must be >= 1");
  weights_.assign(static_cast<std::size_t>(4) * hidden_channels * concat_channels() * kernel * kernel, 0.0);
  biases_.assign(static_cast<std::size_t>(4) * hidden_channels, 0.0);
}

ConvLSTMCell ConvLSTMCell::pass_through(int input_channels, double input_scale, int kernel) {
  // Saturated gates: a sigmoid of +-40 is 1 or ~4e-18 in double precision,
  // so the cell state becomes a running sum gated on weight > 0. The steep
  // input-gate slope keeps weights down to 1e-3 fully open.
  constexpr double kSaturate = 40.0;
  constexpr double kGateSlope = 1e5;
  ConvLSTMCell cell(kernel, input_channels, input_channels);
  const int mask_ch = input_channels - 1;
  const int mid = kernel / 2;
  for (int o = 0; o < input_channels; ++o) {
    cell.bias(Gate::input, o) = -kSaturate;
    cell.weight(Gate::input, o, mask_ch, mid, mid) = kGateSlope;
    cell.bias(Gate::forget, o) = kSaturate;
    cell.bias(Gate::output, o) = kSaturate;
    cell.weight(Gate::candidate, o, o, mid, mid) = input_scale;
  }
  return cell;
}

ConvLSTMCell ConvLSTMCell::random(int kernel, int input_channels, int hidden_channels, std::mt19937& rng,
                                  double scale) {
  ConvLSTMCell cell(kernel, input_channels, hidden_channels);
  std::normal_distribution<double> dist(0.0, scale);
  for (double& w : cell.weights_) w = dist(rng);
  for (double& b : cell.biases_) b = dist(rng);
  return cell;
}

void ConvLSTMCell::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const nlohmann::json header = {{"format", kFormatTag},
                                 {"kernel", kernel_},
                                 {"input_channels", input_channels_},
                                 {"hidden_channels", hidden_channels_},
                                 {"gate_order", {"input", "forget", "output", "candidate"}},
                                 {"layout", "weights[gate][out][in][ky][kx] then biases[gate][out]"},
                                 {"dtype", "float64-le"},
                                 {"weights", weights_.size()},
                                 {"biases", biases_.size()}};
  out << header.dump() << '\n';
  static_assert(std::endian::native == std::endian::little, "weights are stored little-endian");
  out.write(reinterpret_cast<const char*>(weights_.data()), static_cast<std::streamsize>(weights_.size() * 8));
  out.write(reinterpret_cast<const char*>(biases_.data()), static_cast<std::streamsize>(biases_.size() * 8));
}

ConvLSTMCell ConvLSTMCell::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != kFormatTag) throw std::runtime_error(path.string() + ": not a ConvLSTM weight file");
  ConvLSTMCell cell(header.at("kernel").get<int>(), header.at("input_channels").get<int>(),
                    header.at("hidden_channels").get<int>());
  if (header.at("weights").get<std::size_t>() != cell.weights_.size() ||
      header.at("biases").get<std::size_t>() != cell.biases_.size()) {
    throw std::runtime_error(path.string() + ": weight counts disagree with the header shape");
  }
  in.read(reinterpret_cast<char*>(cell.weights_.data()), static_cast<std::streamsize>(cell.weights_.size() * 8));
  in.read(reinterpret_cast<char*>(cell.biases_.data()), static_cast<std::streamsize>(cell.biases_.size() * 8));
  if (!in) throw std::runtime_error(path.string() + ": truncated weight file");
  return cell;
}

AggregatorState AggregatorState::zeros(int width, int height, int hidden_channels) {
  return {FeatureMap(width, height, hidden_channels), FeatureMap(width, height, hidden_channels)};
}

GateActivations convlstm_gates(const ConvLSTMCell& cell, const FeatureMap& input, const AggregatorState& state,
                               Exec exec) {
  if (input.channels() != cell.input_channels()) throw std::invalid_argument("convlstm_step: input channel mismatch");
  if (state.h.channels() != cell.hidden_channels() || state.c.channels() != cell.hidden_channels() ||
      state.h.width() != input.width() || state.h.height() != input.height() || !state.h.same_shape(state.c)) {
    throw std::invalid_argument("convlstm_step: state shape mismatch");
  }
  const int w = input.width(), h = input.height(), hc = cell.hidden_channels(), ic = cell.input_channels();
  const int k = cell.kernel(), r = k / 2;
  GateActivations out{FeatureMap(w, h, hc), FeatureMap(w, h, hc), FeatureMap(w, h, hc), FeatureMap(w, h, hc)};
  FeatureMap* maps[4] = {&out.input, &out.forget, &out.output, &out.candidate};

  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      for (int g = 0; g < 4; ++g) {
        const Gate gate = static_cast<Gate>(g);
        for (int o = 0; o < hc; ++o) {
          double acc = cell.bias(gate, o);
          for (int ky = 0; ky < k; ++ky) {
            const int y = v + ky - r;
            if (y < 0 || y >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int x = u + kx - r;
              if (x < 0 || x >= w) continue;
              const auto xin = input.pixel(x, y);
              const auto hin = state.h.pixel(x, y);
              for (int c = 0; c < ic; ++c) acc += cell.weight(gate, o, c, ky, kx) * xin[c];
              for (int c = 0; c < hc; ++c) acc += cell.weight(gate, o, ic + c, ky, kx) * hin[c];
            }
          }
          maps[g]->at(u, v, o) = gate == Gate::candidate ? std::tanh(acc) : sigmoid(acc);
        }
      }
    }
  });
  return out;
}

AggregatorState convlstm_step(const ConvLSTMCell& cell, const FeatureMap& input, const AggregatorState& state,
                              Exec exec) {
  const GateActivations g = convlstm_gates(cell, input, state, exec);
  AggregatorState next = AggregatorState::zeros(input.width(), input.height(), cell.hidden_channels());
  const auto& i = g.input.values();
  const auto& f = g.forget.values();
  const auto& o = g.output.values();
  const auto& cand = g.candidate.values();
  for (std::size_t n = 0; n < next.c.values().size(); ++n) {
    const double c = f[n] * state.c.values()[n] + i[n] * cand[n];
    next.c.values()[n] = c;
    next.h.values()[n] = o[n] * std::tanh(c);
  }
  return next;
}

FeatureMap aggregate_recurrent(const std::vector<FeatureMap>& warped_features, const ConvLSTMCell& cell, Exec exec) {
  if (warped_features.empty()) throw std::invalid_argument("aggregate_recurrent: no features");
  const FeatureMap& first = warped_features.front();
  AggregatorState state = AggregatorState::zeros(first.width(), first.height(), cell.hidden_channels());
  for (const FeatureMap& f : warped_features) {
    if (!f.same_shape(first)) throw std::invalid_argument("aggregate_recurrent: features differ in shape");
    state = convlstm_step(cell, f, state, exec);
  }
  return state.h;
}

}  // namespace head3d
