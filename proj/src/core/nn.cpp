#include "core/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace amod::neural {

namespace {
constexpr char kMagic[8] = {'A', 'M', 'O', 'D', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t value) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return value;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}
}  // namespace

void ParameterSet::add(const std::string& name, Mat value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("ParameterSet: duplicate name " + name);
  }
}

Mat& ParameterSet::at(const std::string& name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("ParameterSet: missing " + name);
  return it->second;
}

const Mat& ParameterSet::at(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("ParameterSet: missing " + name);
  return it->second;
}

bool ParameterSet::same_shapes(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (const auto& [name, value] : tensors_) {
    const auto it = other.tensors_.find(name);
    if (it == other.tensors_.end() || it->second.rows() != value.rows() ||
        it->second.cols() != value.cols()) {
      return false;
    }
  }
  return true;
}

void Gradients::accumulate(const std::string& name, const Mat& grad) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) {
    tensors.emplace(name, grad);
  } else {
    it->second += grad;
  }
}

void Gradients::zero_like(const ParameterSet& params) {
  tensors.clear();
  for (const auto& [name, value] : params.tensors()) {
    tensors.emplace(name, Mat::Zero(value.rows(), value.cols()));
  }
}

double global_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const auto& [name, grad] : grads.tensors) sum += grad.squaredNorm();
  return std::sqrt(sum);
}

void clip_gradients(Gradients& grads, double ratio) {
  const double norm = global_norm(grads);
  if (norm > ratio) {
    const double factor = ratio / norm;
    for (auto& [name, grad] : grads.tensors) grad *= factor;
  }
}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state) {
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, value] : params.tensors()) {
    const auto it = grads.tensors.find(name);
    if (it == grads.tensors.end()) continue;
    const Mat& grad = it->second;
    Mat& m = state.m.try_emplace(name, Mat::Zero(value.rows(), value.cols())).first->second;
    Mat& v = state.v.try_emplace(name, Mat::Zero(value.rows(), value.cols())).first->second;
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const Mat m_hat = m / bias1;
    const Mat v_hat = v / bias2;
    value.array() -=
        state.learning_rate * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
  }
}

bool is_bias_name(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, "/b") == 0;
}

double l2_penalty(const ParameterSet& params, double coefficient) {
  double sum = 0.0;
  for (const auto& [name, value] : params.tensors()) {
    if (is_bias_name(name)) continue;
    sum += value.squaredNorm();
  }
  return coefficient * sum;
}

void add_l2_gradients(const ParameterSet& params, double coefficient, Gradients& grads) {
  for (const auto& [name, value] : params.tensors()) {
    if (is_bias_name(name)) continue;
    grads.accumulate(name, 2.0 * coefficient * value);
  }
}

Mat glorot_uniform(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      out(r, c) = rng.uniform_in(-limit, limit);
    }
  }
  return out;
}

void Checkpoint::pack(const std::string& prefix, const ParameterSet& params) {
  for (const auto& [name, value] : params.tensors()) {
    tensors[prefix + "/" + name] = value;
  }
}

ParameterSet Checkpoint::unpack(const std::string& prefix) const {
  ParameterSet params;
  const std::string full_prefix = prefix + "/";
  for (const auto& [name, value] : tensors) {
    if (name.rfind(full_prefix, 0) == 0) {
      params.add(name.substr(full_prefix.size()), value);
    }
  }
  if (params.tensors().empty()) {
    throw std::runtime_error("checkpoint: no tensors under prefix " + prefix);
  }
  return params;
}

void Checkpoint::pack_adam(const std::string& prefix, const AdamState& state) {
  Mat scalars(1, 5);
  scalars << state.learning_rate, state.beta1, state.beta2, state.epsilon,
      static_cast<double>(state.step);
  tensors[prefix + "/scalars"] = scalars;
  for (const auto& [name, value] : state.m) tensors[prefix + "/m/" + name] = value;
  for (const auto& [name, value] : state.v) tensors[prefix + "/v/" + name] = value;
}

AdamState Checkpoint::unpack_adam(const std::string& prefix) const {
  AdamState state;
  const Mat& scalars = tensors.at(prefix + "/scalars");
  state.learning_rate = scalars(0, 0);
  state.beta1 = scalars(0, 1);
  state.beta2 = scalars(0, 2);
  state.epsilon = scalars(0, 3);
  state.step = static_cast<long>(scalars(0, 4));
  const std::string m_prefix = prefix + "/m/";
  const std::string v_prefix = prefix + "/v/";
  for (const auto& [name, value] : tensors) {
    if (name.rfind(m_prefix, 0) == 0) state.m[name.substr(m_prefix.size())] = value;
    if (name.rfind(v_prefix, 0) == 0) state.v[name.substr(v_prefix.size())] = value;
  }
  return state;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kFormatVersion);
  write_u64(out, checkpoint.metadata_json.size());
  out.write(checkpoint.metadata_json.data(),
            static_cast<std::streamsize>(checkpoint.metadata_json.size()));
  write_u64(out, checkpoint.tensors.size());
  for (const auto& [name, value] : checkpoint.tensors) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, 2);
    write_u64(out, static_cast<std::uint64_t>(value.rows()));
    write_u64(out, static_cast<std::uint64_t>(value.cols()));
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        const double entry = value(r, c);
        std::uint64_t bits;
        std::memcpy(&bits, &entry, sizeof(bits));
        write_u64(out, bits);
      }
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint checkpoint;
  const std::uint64_t metadata_size = read_u64(in);
  checkpoint.metadata_json.resize(metadata_size);
  in.read(checkpoint.metadata_json.data(), static_cast<std::streamsize>(metadata_size));
  const std::uint64_t tensor_count = read_u64(in);
  for (std::uint64_t k = 0; k < tensor_count; ++k) {
    const std::uint32_t name_size = read_u32(in);
    std::string name(name_size, '\0');
    in.read(name.data(), name_size);
    const std::uint32_t rank = read_u32(in);
    if (rank != 2) throw std::runtime_error("checkpoint: unsupported rank");
    const auto rows = static_cast<Eigen::Index>(read_u64(in));
    const auto cols = static_cast<Eigen::Index>(read_u64(in));
    Mat value(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const std::uint64_t bits = read_u64(in);
        double entry;
        std::memcpy(&entry, &bits, sizeof(entry));
        value(r, c) = entry;
      }
    }
    checkpoint.tensors.emplace(std::move(name), std::move(value));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return checkpoint;
}

}  // namespace amod::neural
