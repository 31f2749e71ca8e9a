#include "srpo/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/version.hpp"

namespace srpo {

using jsonio::json;

std::size_t PolicyModel::num_params() const {
  return feat_embed.size() + tok_embed.size() + pool_weight.size() + out_proj.size() + out_bias.size();
}

PolicyModel init_model(const WorldConfig& world, const ModelConfig& cfg, std::uint64_t seed) {
  world.validate();
  if (cfg.embed_dim < 1) throw ConfigError("model.embed_dim: must be >= 1");
  if (cfg.warm_start_examples < 0) throw ConfigError("model.warm_start_examples: must be >= 0");

  PolicyModel m;
  m.world = world;
  m.cfg = cfg;
  m.feature_count = FeatureLayout(world).size();
  m.vocab_size = world.vocabulary().size();

  const int d = cfg.embed_dim;
  const double range = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(derive_seed(seed, "init", 0));

  m.feat_embed.resize(static_cast<std::size_t>(m.feature_count) * d);
  for (double& w : m.feat_embed) w = rng.symmetric(range);
  m.tok_embed.resize(static_cast<std::size_t>(m.vocab_size) * d);
  for (double& w : m.tok_embed) w = rng.symmetric(range);
  m.pool_weight.assign(static_cast<std::size_t>(world.max_path_len), 1.0);
  m.out_proj.assign(static_cast<std::size_t>(m.vocab_size) * d, 0.0);
  m.out_bias.assign(static_cast<std::size_t>(m.vocab_size), 0.0);
  return m;
}

std::vector<ParamView> param_views(PolicyModel& model) {
  return {{"feat_embed", &model.feat_embed},
          {"tok_embed", &model.tok_embed},
          {"pool_weight", &model.pool_weight},
          {"out_proj", &model.out_proj},
          {"out_bias", &model.out_bias}};
}

std::vector<ParamView> param_views(Gradient& grad) {
  return {{"feat_embed", &grad.feat_embed},
          {"tok_embed", &grad.tok_embed},
          {"pool_weight", &grad.pool_weight},
          {"out_proj", &grad.out_proj},
          {"out_bias", &grad.out_bias}};
}

Gradient Gradient::zeros_like(const PolicyModel& model) {
  Gradient g;
  g.feat_embed.assign(model.feat_embed.size(), 0.0);
  g.tok_embed.assign(model.tok_embed.size(), 0.0);
  g.pool_weight.assign(model.pool_weight.size(), 0.0);
  g.out_proj.assign(model.out_proj.size(), 0.0);
  g.out_bias.assign(model.out_bias.size(), 0.0);
  return g;
}

void Gradient::scale(double a) {
  for (auto view : param_views(*this))
    for (double& x : *view.data) x *= a;
}

void Gradient::axpy(double a, const Gradient& other) {
  auto mine = param_views(*this);
  auto theirs = param_views(const_cast<Gradient&>(other));
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].data->size() != theirs[i].data->size()) throw NumericError("Gradient::axpy: shape mismatch");
    for (std::size_t k = 0; k < mine[i].data->size(); ++k) (*mine[i].data)[k] += a * (*theirs[i].data)[k];
  }
}

double Gradient::squared_norm() const {
  double s = 0.0;
  for (auto view : param_views(const_cast<Gradient&>(*this)))
    for (double x : *view.data) s += x * x;
  return s;
}

void Gradient::check_finite(const std::string& context) const {
  for (auto view : param_views(const_cast<Gradient&>(*this))) {
    for (std::size_t k = 0; k < view.data->size(); ++k) {
      if (!std::isfinite((*view.data)[k]))
        throw NumericError("non-finite gradient in " + std::string(view.name) + "[" + std::to_string(k) +
                           "] (" + context + ")");
    }
  }
}

namespace {

// Incremental context state: h plus bookkeeping to legality-check cheaply.
struct Context {
  const PolicyModel* model;
  const Question* q;
  std::vector<double> h;
  std::vector<Step> steps;  // the walked context (prefix + consumed steps)

  Context(const PolicyModel& m, const Question& question) : model(&m), q(&question) {
    h.assign(static_cast<std::size_t>(m.embed_dim()), 0.0);
    const FeatureLayout layout = m.layout();
    const int d = m.embed_dim();
    for (int f : question_features(question, layout)) {
      const double* row = m.feat_embed.data() + static_cast<std::size_t>(f) * d;
      for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)] += row[i];
    }
  }

  void push(const Step& s, const StepVocabulary& vocab) {
    const int d = model->embed_dim();
    const std::size_t pos = steps.size();
    if (pos >= model->pool_weight.size())
      throw DataError("context longer than max_path_len (question " + q->id + ")");
    const double w = model->pool_weight[pos];
    const double* row = model->tok_embed.data() + static_cast<std::size_t>(vocab.id(s)) * d;
    for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)] += w * row[i];
    steps.push_back(s);
  }
};

// Logits restricted to the legal set; returns the legal steps alongside.
struct MaskedLogits {
  std::vector<Step> legal;
  std::vector<int> ids;
  std::vector<double> z;
};

MaskedLogits masked_logits(const PolicyModel& model, const Context& ctx, const StepVocabulary& vocab) {
  MaskedLogits out;
  out.legal = legal_next_steps(*ctx.q, ctx.steps, model.world);
  const int d = model.embed_dim();
  out.ids.reserve(out.legal.size());
  out.z.reserve(out.legal.size());
  for (const Step& s : out.legal) {
    const int v = vocab.id(s);
    const double* row = model.out_proj.data() + static_cast<std::size_t>(v) * d;
    double z = model.out_bias[static_cast<std::size_t>(v)];
    for (int i = 0; i < d; ++i) z += row[i] * ctx.h[static_cast<std::size_t>(i)];
    out.ids.push_back(v);
    out.z.push_back(z);
  }
  return out;
}

double logsumexp(std::span<const double> z) {
  double zmax = kNegInf;
  for (double v : z) zmax = std::max(zmax, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - zmax);
  return zmax + std::log(s);
}

int index_of_step(const std::vector<Step>& legal, const Step& s) {
  for (std::size_t i = 0; i < legal.size(); ++i)
    if (legal[i] == s) return static_cast<int>(i);
  return -1;
}

}  // namespace

std::vector<double> logits(const PolicyModel& model, const Question& q, std::span<const Step> prefix) {
  if (!prefix.empty() && prefix.back().is_terminal())
    throw DataError("logits: prefix already terminates (question " + q.id + ")");
  const StepVocabulary vocab = model.vocab();
  Context ctx(model, q);
  for (const Step& s : prefix) ctx.push(s, vocab);
  const MaskedLogits ml = masked_logits(model, ctx, vocab);
  std::vector<double> out(static_cast<std::size_t>(model.vocab_size), kNegInf);
  for (std::size_t i = 0; i < ml.ids.size(); ++i) out[static_cast<std::size_t>(ml.ids[i])] = ml.z[i];
  return out;
}

bool step_is_legal(const PolicyModel& model, const Question& q, std::span<const Step> prefix, const Step& next) {
  const auto legal = legal_next_steps(q, prefix, model.world);
  return index_of_step(legal, next) >= 0;
}

double step_logprob(const PolicyModel& model, const Question& q, std::span<const Step> prefix, const Step& next) {
  const StepVocabulary vocab = model.vocab();
  Context ctx(model, q);
  for (const Step& s : prefix) ctx.push(s, vocab);
  const MaskedLogits ml = masked_logits(model, ctx, vocab);
  const int at = index_of_step(ml.legal, next);
  if (at < 0) return kNegInf;  // masked step, flagged by the -inf value
  return ml.z[static_cast<std::size_t>(at)] - logsumexp(ml.z);
}

double steps_loglik(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                    std::span<const Step> steps, double temperature) {
  if (!(temperature > 0.0)) throw NumericError("steps_loglik: temperature must be positive");
  const StepVocabulary vocab = model.vocab();
  Context ctx(model, q);
  for (const Step& s : prefix) ctx.push(s, vocab);
  double total = 0.0;
  std::vector<double> scaled;
  for (const Step& s : steps) {
    const MaskedLogits ml = masked_logits(model, ctx, vocab);
    const int at = index_of_step(ml.legal, s);
    if (at < 0)
      throw DataError("illegal path: step " + step_to_string(s) + " masked at position " +
                      std::to_string(ctx.steps.size()) + " (question " + q.id + ")");
    scaled.assign(ml.z.begin(), ml.z.end());
    for (double& z : scaled) z /= temperature;
    total += scaled[static_cast<std::size_t>(at)] - logsumexp(scaled);
    ctx.push(s, vocab);
  }
  return total;
}

double path_loglik(const PolicyModel& model, const Question& q, const ReasoningPath& path, double temperature) {
  if (path.question_id != q.id)
    throw DataError("path_loglik: path for question " + path.question_id + " scored against " + q.id);
  if (path.steps.size() > static_cast<std::size_t>(model.world.max_path_len))
    throw DataError("illegal path: longer than max_path_len (question " + q.id + ")");
  return steps_loglik(model, q, {}, path.steps, temperature);
}

namespace {

// One temperature-scaled draw from the legal-step distribution.
Step draw_step(const PolicyModel& model, const Context& ctx, const StepVocabulary& vocab, double temperature,
               Rng& rng) {
  const MaskedLogits ml = masked_logits(model, ctx, vocab);
  double zmax = kNegInf;
  for (double z : ml.z) zmax = std::max(zmax, z);
  std::vector<double> w(ml.z.size());
  for (std::size_t i = 0; i < ml.z.size(); ++i) w[i] = std::exp((ml.z[i] - zmax) / temperature);
  return ml.legal[rng.categorical(w)];
}

}  // namespace

ReasoningPath sample_path(const PolicyModel& model, const Question& q, double temperature, Rng& rng, int max_len) {
  if (!(temperature > 0.0)) throw NumericError("sample_path: temperature must be positive");
  const int limit = max_len > 0 ? std::min(max_len, model.world.max_path_len) : model.world.max_path_len;
  const StepVocabulary vocab = model.vocab();
  Context ctx(model, q);
  ReasoningPath path;
  path.question_id = q.id;
  path.kind = PathKind::sampled_backbone;
  while (static_cast<int>(path.steps.size()) < limit) {
    const Step s = draw_step(model, ctx, vocab, temperature, rng);
    path.steps.push_back(s);
    if (s.is_terminal()) return path;
    ctx.push(s, vocab);
  }
  path.truncated = true;
  return path;
}

Continuation sample_continuation(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                                 double temperature, Rng& rng, int max_len) {
  if (!(temperature > 0.0)) throw NumericError("sample_continuation: temperature must be positive");
  if (!prefix.empty() && prefix.back().is_terminal())
    throw DataError("sample_continuation: prefix already terminates (question " + q.id + ")");
  const int limit = max_len > 0 ? std::min(max_len, model.world.max_path_len) : model.world.max_path_len;
  const StepVocabulary vocab = model.vocab();
  Context ctx(model, q);
  for (const Step& s : prefix) ctx.push(s, vocab);
  Continuation cont;
  while (static_cast<int>(ctx.steps.size()) < limit) {
    const Step s = draw_step(model, ctx, vocab, temperature, rng);
    cont.steps.push_back(s);
    if (s.is_terminal()) return cont;
    ctx.push(s, vocab);
  }
  cont.truncated = true;
  return cont;
}

void add_steps_loglik_grad(const PolicyModel& model, const Question& q, std::span<const Step> prefix,
                           std::span<const Step> steps, double coeff, Gradient& grad, double temperature) {
  if (!(temperature > 0.0)) throw NumericError("add_steps_loglik_grad: temperature must be positive");
  const StepVocabulary vocab = model.vocab();
  const FeatureLayout layout = model.layout();
  const int d = model.embed_dim();
  const std::vector<int> features = question_features(q, layout);

  Context ctx(model, q);
  for (const Step& s : prefix) ctx.push(s, vocab);

  std::vector<double> g_h(static_cast<std::size_t>(d));
  std::vector<double> p;
  std::vector<double> scaled;
  for (const Step& s : steps) {
    const MaskedLogits ml = masked_logits(model, ctx, vocab);
    const int at = index_of_step(ml.legal, s);
    if (at < 0)
      throw DataError("illegal path: step " + step_to_string(s) + " masked at position " +
                      std::to_string(ctx.steps.size()) + " (question " + q.id + ")");
    scaled.assign(ml.z.begin(), ml.z.end());
    for (double& z : scaled) z /= temperature;
    const double lse = logsumexp(scaled);
    p.resize(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) p[i] = std::exp(scaled[i] - lse);

    // d logp(s)/dz_v = (1[v = s] - p_v) / T over legal v; push through
    // z_v = U_v . h + b_v, then h back into the embeddings and pool weights.
    std::fill(g_h.begin(), g_h.end(), 0.0);
    for (std::size_t i = 0; i < ml.ids.size(); ++i) {
      const double gz = coeff * ((static_cast<int>(i) == at ? 1.0 : 0.0) - p[i]) / temperature;
      const int v = ml.ids[i];
      double* proj_row = grad.out_proj.data() + static_cast<std::size_t>(v) * d;
      const double* u_row = model.out_proj.data() + static_cast<std::size_t>(v) * d;
      for (int k = 0; k < d; ++k) {
        proj_row[k] += gz * ctx.h[static_cast<std::size_t>(k)];
        g_h[static_cast<std::size_t>(k)] += gz * u_row[k];
      }
      if (!getenv("SRPO_FREEZE_BIAS")) grad.out_bias[static_cast<std::size_t>(v)] += gz;
    }
    for (int f : features) {
      double* row = grad.feat_embed.data() + static_cast<std::size_t>(f) * d;
      for (int k = 0; k < d; ++k) row[k] += g_h[static_cast<std::size_t>(k)];
    }
    for (std::size_t j = 0; j < ctx.steps.size(); ++j) {
      const int tok = vocab.id(ctx.steps[j]);
      const double w = model.pool_weight[j];
      double* row = grad.tok_embed.data() + static_cast<std::size_t>(tok) * d;
      const double* emb = model.tok_embed.data() + static_cast<std::size_t>(tok) * d;
      double dot = 0.0;
      for (int k = 0; k < d; ++k) {
        row[k] += w * g_h[static_cast<std::size_t>(k)];
        dot += g_h[static_cast<std::size_t>(k)] * emb[k];
      }
      grad.pool_weight[j] += dot;
    }
    ctx.push(s, vocab);
  }
}

std::string model_checksum(const PolicyModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto view : param_views(const_cast<PolicyModel&>(model))) {
    h = fnv1a(view.name, h);
    const auto* bytes = reinterpret_cast<const unsigned char*>(view.data->data());
    h = fnv1a(std::span<const unsigned char>(bytes, view.data->size() * sizeof(double)), h);
  }
  return checksum_hex(h);
}

namespace {

constexpr char kMagic[8] = {'S', 'R', 'P', 'O', 'C', 'K', 'P', 'T'};

void put_u16(std::string& out, std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
  const std::string* buf;
  std::size_t at = 0;
  const std::string* name;

  void need(std::size_t n) const {
    if (at + n > buf->size()) throw DataError("checkpoint truncated: " + *name);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v;
    std::memcpy(&v, buf->data() + at, 2);
    at += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf->data() + at, 4);
    at += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf->data() + at, 8);
    at += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string v = buf->substr(at, n);
    at += n;
    return v;
  }
};

}  // namespace

void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path,
                     const std::string& trainer_meta_json) {
  json meta{
      {"schema", kCheckpointSchemaVersion},
      {"world", jsonio::world_to_json(model.world)},
      {"model", {{"embed_dim", model.cfg.embed_dim}, {"warm_start_examples", model.cfg.warm_start_examples}}},
      {"trainer", jsonio::parse_or_data_error(trainer_meta_json, "trainer meta")},
  };
  const std::string meta_text = meta.dump();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(kCheckpointSchemaVersion));
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;

  auto views = param_views(const_cast<PolicyModel&>(model));
  put_u32(out, static_cast<std::uint32_t>(views.size()));
  for (auto view : views) {
    const std::string name = view.name;
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_u64(out, static_cast<std::uint64_t>(view.data->size()));
    out.append(reinterpret_cast<const char*>(view.data->data()), view.data->size() * sizeof(double));
  }
  put_u64(out, fnv1a(out));
  write_file(path, out);
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  const std::string name = path.string();
  if (buf.size() < sizeof(kMagic) + 16 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + name);

  const std::uint64_t stored_sum = [&] {
    std::uint64_t v;
    std::memcpy(&v, buf.data() + buf.size() - 8, 8);
    return v;
  }();
  if (fnv1a(std::string_view(buf.data(), buf.size() - 8)) != stored_sum)
    throw DataError("checkpoint checksum mismatch (corrupt file): " + name);

  Reader r{&buf, sizeof(kMagic), &name};
  const std::uint32_t version = r.u32();
  if (version != static_cast<std::uint32_t>(kCheckpointSchemaVersion))
    throw DataError("checkpoint schema version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointSchemaVersion) + "): " + name);

  const json meta = jsonio::parse_or_data_error(r.bytes(r.u32()), name);
  PolicyModel m;
  m.world = jsonio::world_from_json(meta.at("world"));
  m.cfg.embed_dim = meta.at("model").at("embed_dim").get<int>();
  m.cfg.warm_start_examples = meta.at("model").at("warm_start_examples").get<int>();
  m.feature_count = FeatureLayout(m.world).size();
  m.vocab_size = m.world.vocabulary().size();

  const std::uint32_t array_count = r.u32();
  auto views = param_views(m);
  if (array_count != views.size()) throw DataError("checkpoint array count mismatch: " + name);
  for (auto view : views) {
    const std::string arr_name = r.bytes(r.u16());
    if (arr_name != view.name) throw DataError("checkpoint array order mismatch (" + arr_name + "): " + name);
    const std::uint64_t count = r.u64();
    view.data->resize(count);
    const std::string raw = r.bytes(count * sizeof(double));
    std::memcpy(view.data->data(), raw.data(), raw.size());
  }

  const int d = m.cfg.embed_dim;
  if (m.feat_embed.size() != static_cast<std::size_t>(m.feature_count) * d ||
      m.tok_embed.size() != static_cast<std::size_t>(m.vocab_size) * d ||
      m.pool_weight.size() != static_cast<std::size_t>(m.world.max_path_len) ||
      m.out_proj.size() != static_cast<std::size_t>(m.vocab_size) * d ||
      m.out_bias.size() != static_cast<std::size_t>(m.vocab_size))
    throw DataError("checkpoint parameter shapes inconsistent with its world config: " + name);
  for (auto view : param_views(m))
    for (double x : *view.data)
      if (!std::isfinite(x)) throw DataError("checkpoint contains non-finite parameters: " + name);
  return m;
}

}  // namespace srpo
