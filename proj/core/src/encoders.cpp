#include "dtsg/encoders.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dtsg/error.hpp"

namespace dtsg {

Matrix positional_encoding(int length, int dim) {
  Matrix pe(length, dim);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

SelfAttentionBlock::SelfAttentionBlock(const ParamScope& scope, int dim, int heads, int ffn_dim)
    : heads_(heads),
      query_(scope.sub("query"), dim, dim),
      key_(scope.sub("key"), dim, dim),
      value_(scope.sub("value"), dim, dim),
      output_(scope.sub("output"), dim, dim),
      norm1_(scope.sub("norm1"), dim),
      ffn_(scope.sub("ffn"), dim, ffn_dim, dim),
      norm2_(scope.sub("norm2"), dim) {
  if (dim % heads != 0) throw Error("encoders", "dimension must be divisible by head count");
}

ag::Var SelfAttentionBlock::operator()(ag::Graph& g, const ag::Var& x, const Mask& mask,
                                       AttentionTrace* trace) const {
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != x.rows()) {
    throw Error("encoders", "mask length does not match sequence length");
  }
  const Eigen::Index dim = x.cols();
  const Eigen::Index width = dim / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));
  ag::Var q = query_(g, x);
  ag::Var k = key_(g, x);
  ag::Var v = value_(g, x);
  std::vector<ag::Var> outputs;
  outputs.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    ag::Var qh = ag::slice_cols(q, h * width, width);
    ag::Var kh = ag::slice_cols(k, h * width, width);
    ag::Var vh = ag::slice_cols(v, h * width, width);
    ag::Var weights = ag::row_softmax(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt), mask);
    if (trace != nullptr) trace->weights.push_back(weights.value());
    outputs.push_back(ag::matmul(weights, vh));
  }
  ag::Var attended = heads_ == 1 ? outputs[0] : ag::concat_cols(outputs);
  ag::Var y = norm1_(g, ag::add(x, output_(g, attended)));
  return norm2_(g, ag::add(y, ffn_(g, y)));
}

VideoEncoder::VideoEncoder(const ParamScope& scope, const ModelConfig& cfg)
    : feature_dim_(cfg.feature_dim),
      positional_(cfg.positional_encoding),
      input_(scope.sub("input"), cfg.feature_dim, cfg.d_model) {
  for (int b = 0; b < cfg.depth; ++b) {
    blocks_.emplace_back(scope.sub("block" + std::to_string(b)), cfg.d_model, cfg.heads, cfg.ffn_dim);
  }
}

ag::Var VideoEncoder::operator()(ag::Graph& g, const Matrix& clips, AttentionTrace* trace) const {
  if (clips.cols() != feature_dim_) {
    throw Error("encoders", "video features have " + std::to_string(clips.cols()) + " dims, expected " +
                                std::to_string(feature_dim_));
  }
  if (clips.rows() < 1) throw Error("encoders", "empty video");
  ag::Var x = input_(g, g.constant(clips));
  if (positional_) x = ag::add_constant(x, positional_encoding(static_cast<int>(x.rows()), static_cast<int>(x.cols())));
  const Mask mask = all_valid(static_cast<std::size_t>(clips.rows()));
  for (const auto& block : blocks_) x = block(g, x, mask, trace);
  return x;
}

QueryEncoder::QueryEncoder(const ParamScope& scope, const ModelConfig& cfg) : positional_(cfg.positional_encoding) {
  embedding_ = &scope.add("embedding", uniform(cfg.vocab_size, cfg.word_dim(), -0.1, 0.1, scope.rng));
  embedding_->trainable = !cfg.freeze_word_vectors;
  if (cfg.word_dim() != cfg.d_model) projection_.emplace(scope.sub("projection"), cfg.word_dim(), cfg.d_model);
  for (int b = 0; b < cfg.depth; ++b) {
    blocks_.emplace_back(scope.sub("block" + std::to_string(b)), cfg.d_model, cfg.heads, cfg.ffn_dim);
  }
}

ag::Var QueryEncoder::operator()(ag::Graph& g, const EncodedQuery& query, AttentionTrace* trace) const {
  if (query.ids.size() != query.mask.size() || query.ids.empty()) throw Error("encoders", "malformed query");
  std::vector<int> ids = query.ids;
  const int vocab = static_cast<int>(embedding_->value.rows());
  for (int& id : ids) {
    if (id < 0 || id >= vocab) id = Vocabulary::kUnk;
  }
  ag::Var x = ag::gather_rows(g.parameter(*embedding_), ids);
  if (projection_) x = (*projection_)(g, x);
  if (positional_) x = ag::add_constant(x, positional_encoding(static_cast<int>(x.rows()), static_cast<int>(x.cols())));
  for (const auto& block : blocks_) x = block(g, x, query.mask, trace);
  return x;
}

int load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, Parameter& table) {
  std::ifstream in(path);
  if (!in) throw Error("encoders", "cannot open word vector file " + path.string());
  std::string line;
  int replaced = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto token = j.at("token").get<std::string>();
    const auto vec = j.at("vec").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(vec.size()) != table.value.cols()) {
      throw Error("encoders", "word vector for '" + token + "' has " + std::to_string(vec.size()) +
                                  " dims, table expects " + std::to_string(table.value.cols()));
    }
    const int id = vocab.id(token);
    if (id == Vocabulary::kUnk && token != "<unk>") continue;
    for (std::size_t c = 0; c < vec.size(); ++c) table.value(id, static_cast<Eigen::Index>(c)) = vec[c];
    ++replaced;
  }
  return replaced;
}

}  // namespace dtsg
