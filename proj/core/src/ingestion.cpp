#include "aep/ingestion.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "aep/error.hpp"
#include "aep/random.hpp"
#include "json_detail.hpp"

namespace aep {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a_update(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string checksum_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json outcome_to_json(const EndpointOutcome& o) {
  return {{"latency_ms", o.latency_ms}, {"cutoff", o.cutoff}};
}

EndpointOutcome outcome_from_json(const json& j) {
  EndpointOutcome o;
  o.latency_ms = j.at("latency_ms").get<std::int32_t>();
  o.cutoff = j.at("cutoff").get<bool>();
  if (o.latency_ms < 0) throw ValidationError("negative latency");
  return o;
}

json record_to_json(const LogRecord& r) {
  json features = json::object();
  if (r.audio) features["audio"] = *r.audio;
  if (r.hypothesis) features["hypothesis"] = *r.hypothesis;
  if (r.pause_duration_ms) features["pause_duration"] = *r.pause_duration_ms;
  if (r.wakeword_duration_ms) features["wakeword_duration"] = *r.wakeword_duration_ms;
  if (r.pitch) features["pitch"] = *r.pitch;
  if (r.intent_domain) features["intent_domain"] = *r.intent_domain;
  json j = {
      {"id", r.id},
      {"split", to_string(r.split)},
      {"features", std::move(features)},
      {"outcome_standard", outcome_to_json(r.outcome_standard)},
  };
  if (r.outcome_relaxed) j["outcome_relaxed"] = outcome_to_json(*r.outcome_relaxed);
  if (r.label) j["label"] = static_cast<int>(*r.label);
  return j;
}

void check_group_length(const std::optional<std::vector<double>>& group, std::size_t expected,
                        std::string_view name, std::uint64_t id) {
  if (group && group->size() != expected) {
    throw ValidationError("record " + std::to_string(id) + ": feature group '" + std::string(name) +
                          "' has " + std::to_string(group->size()) + " values, expected " +
                          std::to_string(expected));
  }
}

LogRecord record_from_json(const json& j, const FeatureDims& dims) {
  LogRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.split = parse_split(j.at("split").get<std::string>());
  const json& f = j.at("features");
  for (auto it = f.begin(); it != f.end(); ++it) {
    const FeatureGroup g = parse_feature_group(it.key());
    switch (g) {
      case FeatureGroup::audio: r.audio = it->get<std::vector<double>>(); break;
      case FeatureGroup::hypothesis: r.hypothesis = it->get<std::vector<double>>(); break;
      case FeatureGroup::pause_duration: r.pause_duration_ms = it->get<double>(); break;
      case FeatureGroup::wakeword_duration: r.wakeword_duration_ms = it->get<double>(); break;
      case FeatureGroup::pitch: r.pitch = it->get<std::vector<double>>(); break;
      case FeatureGroup::intent_domain: r.intent_domain = it->get<std::size_t>(); break;
    }
  }
  check_group_length(r.audio, dims.audio, "audio", r.id);
  check_group_length(r.hypothesis, dims.hypothesis, "hypothesis", r.id);
  check_group_length(r.pitch, dims.pitch, "pitch", r.id);
  if (r.intent_domain && *r.intent_domain >= dims.intent_domains) {
    throw ValidationError("record " + std::to_string(r.id) + ": intent_domain out of range");
  }
  r.outcome_standard = outcome_from_json(j.at("outcome_standard"));
  if (j.contains("outcome_relaxed")) r.outcome_relaxed = outcome_from_json(j.at("outcome_relaxed"));
  if (j.contains("label")) {
    const int label = j.at("label").get<int>();
    if (label != 0 && label != 1) {
      throw ValidationError("record " + std::to_string(r.id) + ": label must be 0 or 1");
    }
    r.label = static_cast<Class>(label);
    if (*r.label != derive_label(r)) {
      throw ValidationError("record " + std::to_string(r.id) +
                            ": label is inconsistent with outcome_standard.cutoff");
    }
  }
  return r;
}

}  // namespace

namespace detail {

json manifest_to_json(const CorpusManifest& m) {
  json splits = json::object();
  for (Split s : kAllSplits) {
    const auto& st = m.stats(s);
    splits[std::string(to_string(s))] = {
        {"file", to_string(s)},
        {"records", st.records},
        {"positives", st.positives},
        {"positive_rate", st.positive_rate},
        {"checksum", st.checksum},
    };
  }
  return {
      {"format", kCorpusFormat},
      {"version", m.format_version},
      {"seed", m.seed},
      {"split_ratios", m.split_ratios},
      {"feature_dims",
       {{"audio", m.feature_dims.audio},
        {"hypothesis", m.feature_dims.hypothesis},
        {"pause_duration", 1},
        {"wakeword_duration", 1},
        {"pitch", m.feature_dims.pitch},
        {"intent_domain", m.feature_dims.intent_domains}}},
      {"standard_only_observational", m.standard_only_observational},
      {"records", m.total_records()},
      {"splits", std::move(splits)},
  };
}

CorpusManifest manifest_from_json(const json& j) {
  if (j.at("format").get<std::string>() != kCorpusFormat) throw FormatError("not a corpus manifest");
  CorpusManifest m;
  m.format_version = j.at("version").get<int>();
  if (m.format_version != kCorpusVersion) {
    throw FormatError("unsupported corpus version " + std::to_string(m.format_version));
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  const json& d = j.at("feature_dims");
  m.feature_dims.audio = d.at("audio").get<std::size_t>();
  m.feature_dims.hypothesis = d.at("hypothesis").get<std::size_t>();
  m.feature_dims.pitch = d.at("pitch").get<std::size_t>();
  m.feature_dims.intent_domains = d.at("intent_domain").get<std::size_t>();
  m.standard_only_observational = j.at("standard_only_observational").get<bool>();
  for (Split s : kAllSplits) {
    const json& js = j.at("splits").at(std::string(to_string(s)));
    auto& st = m.splits[static_cast<std::size_t>(s)];
    st.records = js.at("records").get<std::size_t>();
    st.positives = js.at("positives").get<std::size_t>();
    st.positive_rate = js.at("positive_rate").get<double>();
    st.checksum = js.at("checksum").get<std::string>();
  }
  return m;
}

}  // namespace detail

std::string fnv1a64_hex(std::string_view bytes) { return checksum_string(fnv1a_update(kFnvOffset, bytes)); }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : kAllSplits) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

Class derive_label(const LogRecord& record) noexcept { return derive_label(record.outcome_standard); }

LogRecord to_log_record(const Utterance& u, Split split) {
  LogRecord r;
  r.id = u.id;
  r.split = split;
  r.audio = u.features.audio;
  r.hypothesis = u.features.hypothesis;
  r.pause_duration_ms = u.features.pause_duration_ms;
  r.wakeword_duration_ms = u.features.wakeword_duration_ms;
  r.pitch = u.features.pitch;
  r.intent_domain = u.features.intent_index();
  r.outcome_standard = u.outcome_standard;
  r.outcome_relaxed = u.outcome_relaxed;
  r.label = u.label;
  return r;
}

Utterance to_utterance(const LogRecord& r, const FeatureDims& dims) {
  if (!r.outcome_relaxed) {
    throw ValidationError("record " + std::to_string(r.id) +
                          " has no relaxed outcome; corpus is standard-only observational");
  }
  Utterance u;
  u.id = r.id;
  u.features.audio = r.audio.value_or(std::vector<double>(dims.audio, 0.0));
  u.features.hypothesis = r.hypothesis.value_or(std::vector<double>(dims.hypothesis, 0.0));
  u.features.pause_duration_ms = r.pause_duration_ms.value_or(0.0);
  u.features.wakeword_duration_ms = r.wakeword_duration_ms.value_or(0.0);
  u.features.pitch = r.pitch.value_or(std::vector<double>(dims.pitch, 0.0));
  u.features.intent_domain.assign(dims.intent_domains, 0.0);
  if (r.intent_domain) u.features.intent_domain.at(*r.intent_domain) = 1.0;
  u.outcome_standard = r.outcome_standard;
  u.outcome_relaxed = *r.outcome_relaxed;
  u.label = derive_label(r);
  return u;
}

std::size_t CorpusManifest::total_records() const {
  std::size_t n = 0;
  for (const auto& s : splits) n += s.records;
  return n;
}

double round_rate(double rate) { return std::round(rate * 1e4) / 1e4; }

struct CorpusWriter::State {
  std::filesystem::path dir;
  CorpusManifest manifest;
  std::array<std::ofstream, 3> files;
  std::array<std::uint64_t, 3> hashes{kFnvOffset, kFnvOffset, kFnvOffset};
  bool finished = false;
};

CorpusWriter::CorpusWriter(const std::filesystem::path& dir, FeatureDims dims, std::uint64_t seed,
                           std::array<double, 3> split_ratios)
    : state_(std::make_unique<State>()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string() + ": " + ec.message());
  state_->dir = dir;
  state_->manifest.seed = seed;
  state_->manifest.feature_dims = dims;
  state_->manifest.split_ratios = split_ratios;
  for (Split s : kAllSplits) {
    const auto path = dir / std::string(to_string(s));
    auto& f = state_->files[static_cast<std::size_t>(s)];
    f.open(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
  }
}

CorpusWriter::~CorpusWriter() = default;

void CorpusWriter::append(const LogRecord& record) {
  if (state_->finished) throw ContractError("CorpusWriter::append after finish");
  const auto& dims = state_->manifest.feature_dims;
  check_group_length(record.audio, dims.audio, "audio", record.id);
  check_group_length(record.hypothesis, dims.hypothesis, "hypothesis", record.id);
  check_group_length(record.pitch, dims.pitch, "pitch", record.id);
  if (record.label && *record.label != derive_label(record)) {
    throw ValidationError("record " + std::to_string(record.id) +
                          ": label is inconsistent with outcome_standard.cutoff");
  }
  const auto k = static_cast<std::size_t>(record.split);
  std::string line = record_to_json(record).dump();
  line.push_back('\n');
  state_->files[k] << line;
  if (!state_->files[k]) throw IoError("write failed in corpus directory " + state_->dir.string());
  state_->hashes[k] = fnv1a_update(state_->hashes[k], line);
  auto& st = state_->manifest.splits[k];
  ++st.records;
  if (derive_label(record) == Class::class1) ++st.positives;
  if (!record.outcome_relaxed) state_->manifest.standard_only_observational = true;
}

CorpusManifest CorpusWriter::finish() {
  if (state_->finished) throw ContractError("CorpusWriter::finish called twice");
  for (std::size_t k = 0; k < 3; ++k) {
    state_->files[k].close();
    if (!state_->files[k]) throw IoError("failed to close split file");
    auto& st = state_->manifest.splits[k];
    st.checksum = checksum_string(state_->hashes[k]);
    st.positive_rate =
        st.records == 0 ? 0.0 : round_rate(static_cast<double>(st.positives) / st.records);
  }
  detail::write_file(state_->dir / "manifest", detail::manifest_to_json(state_->manifest).dump(2) + "\n");
  state_->finished = true;
  return state_->manifest;
}

std::vector<Split> assign_splits(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0,1]");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_dev = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x73706c6974ULL));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<Split> out(n, Split::test);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      out[order[i]] = Split::train;
    } else if (i < n_train + n_dev) {
      out[order[i]] = Split::dev;
    }
  }
  return out;
}

CorpusManifest write_corpus(std::span<const Utterance> utterances, const std::filesystem::path& dir,
                            std::array<double, 3> split_ratios, std::uint64_t seed) {
  const auto splits = assign_splits(utterances.size(), split_ratios, seed);
  FeatureDims dims;
  if (!utterances.empty()) dims = utterances.front().features.dims();
  CorpusWriter writer(dir, dims, seed, split_ratios);
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    writer.append(to_log_record(utterances[i], splits[i]));
  }
  return writer.finish();
}

CorpusManifest describe_corpus(std::span<const Utterance> utterances, std::span<const Split> splits,
                               std::uint64_t seed, std::array<double, 3> split_ratios) {
  if (utterances.size() != splits.size()) throw ValidationError("describe_corpus: one split per utterance");
  CorpusManifest m;
  m.seed = seed;
  m.split_ratios = split_ratios;
  if (!utterances.empty()) m.feature_dims = utterances.front().features.dims();
  std::array<std::uint64_t, 3> hashes{kFnvOffset, kFnvOffset, kFnvOffset};
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto k = static_cast<std::size_t>(splits[i]);
    std::string line = record_to_json(to_log_record(utterances[i], splits[i])).dump();
    line.push_back('\n');
    hashes[k] = fnv1a_update(hashes[k], line);
    ++m.splits[k].records;
    if (utterances[i].label == Class::class1) ++m.splits[k].positives;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    auto& st = m.splits[k];
    st.checksum = checksum_string(hashes[k]);
    st.positive_rate = st.records == 0 ? 0.0 : round_rate(static_cast<double>(st.positives) / st.records);
  }
  return m;
}

RecordStream::RecordStream(const std::filesystem::path& file, Split split, FeatureDims dims)
    : file_(file), in_(file, std::ios::binary), split_(split), dims_(dims) {
  if (!in_) throw IoError("cannot open " + file.string());
}

std::optional<LogRecord> RecordStream::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    const std::string where = file_.string() + ":" + std::to_string(line_);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + ": malformed record: " + e.what());
    }
    LogRecord r;
    try {
      r = record_from_json(j, dims_);
    } catch (const json::exception& e) {
      throw FormatError(where + ": malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (r.split != split_) {
      throw ValidationError(where + ": record " + std::to_string(r.id) + " is tagged '" +
                            std::string(to_string(r.split)) + "' inside the " +
                            std::string(to_string(split_)) + " file");
    }
    return r;
  }
  return std::nullopt;
}

CorpusReader::CorpusReader(const std::filesystem::path& dir) : dir_(dir) {
  const auto manifest_path = dir / "manifest";
  if (!std::filesystem::exists(manifest_path)) throw IoError("missing manifest in " + dir.string());
  try {
    manifest_ = detail::manifest_from_json(json::parse(detail::read_file(manifest_path)));
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  for (Split s : kAllSplits) {
    const auto path = dir / std::string(to_string(s));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing split file " + path.string());
    std::uint64_t h = kFnvOffset;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      h = fnv1a_update(h, std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    }
    if (checksum_string(h) != manifest_.stats(s).checksum) {
      throw FormatError("checksum mismatch for " + path.string());
    }
  }
}

RecordStream CorpusReader::open(Split split) const {
  return RecordStream(dir_ / std::string(to_string(split)), split, manifest_.feature_dims);
}

std::vector<LogRecord> CorpusReader::load_records(Split split) const {
  std::vector<LogRecord> out;
  out.reserve(manifest_.stats(split).records);
  auto stream = open(split);
  while (auto r = stream.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<Utterance> CorpusReader::load_utterances(Split split) const {
  std::vector<Utterance> out;
  out.reserve(manifest_.stats(split).records);
  auto stream = open(split);
  while (auto r = stream.next()) out.push_back(to_utterance(*r, manifest_.feature_dims));
  return out;
}

}  // namespace aep
