#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aep/environment.hpp"
#include "aep/types.hpp"

namespace aep {

enum class Split { train = 0, dev = 1, test = 2 };

inline constexpr std::array<Split, 3> kAllSplits = {Split::train, Split::dev, Split::test};

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// One line of a corpus file. Feature groups are optional; a missing
/// outcome_relaxed marks the record as standard-only observational.
struct LogRecord {
  std::uint64_t id = 0;
  Split split = Split::train;
  std::optional<std::vector<double>> audio;
  std::optional<std::vector<double>> hypothesis;
  std::optional<double> pause_duration_ms;
  std::optional<double> wakeword_duration_ms;
  std::optional<std::vector<double>> pitch;
  std::optional<std::size_t> intent_domain;
  EndpointOutcome outcome_standard;
  std::optional<EndpointOutcome> outcome_relaxed;
  std::optional<Class> label;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

/// Class1 iff the standard configuration cut the record off.
Class derive_label(const LogRecord& record) noexcept;

LogRecord to_log_record(const Utterance& utterance, Split split);
/// Missing groups become zeros. Throws ValidationError when the relaxed
/// outcome is absent, since an Utterance needs both outcomes.
Utterance to_utterance(const LogRecord& record, const FeatureDims& dims);

struct SplitStats {
  std::size_t records = 0;
  std::size_t positives = 0;
  double positive_rate = 0.0;  // fraction, rounded to 4 decimals
  std::string checksum;        // "fnv1a64:<16 hex digits>" of the split file

  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

inline constexpr std::string_view kCorpusFormat = "aep-corpus";
inline constexpr int kCorpusVersion = 1;

struct CorpusManifest {
  int format_version = kCorpusVersion;
  std::uint64_t seed = 0;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  FeatureDims feature_dims;
  bool standard_only_observational = false;
  std::array<SplitStats, 3> splits;

  const SplitStats& stats(Split s) const { return splits[static_cast<std::size_t>(s)]; }
  std::size_t total_records() const;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

double round_rate(double rate);

/// Streams records into a corpus directory:
///   <dir>/manifest   JSON manifest
///   <dir>/train      one JSON record per line
///   <dir>/dev
///   <dir>/test
/// Requires exclusive access to the directory while open.
class CorpusWriter {
 public:
  CorpusWriter(const std::filesystem::path& dir, FeatureDims dims, std::uint64_t seed,
               std::array<double, 3> split_ratios);
  ~CorpusWriter();
  CorpusWriter(const CorpusWriter&) = delete;
  CorpusWriter& operator=(const CorpusWriter&) = delete;

  void append(const LogRecord& record);
  /// Flushes the split files and writes the manifest.
  CorpusManifest finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Split assignment used by write_corpus: counts are round(ratio * n) for
/// train and dev with test taking the remainder, filled from a seeded
/// shuffle of the indices.
std::vector<Split> assign_splits(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

/// Manifest that write_corpus would produce for this assignment, computed
/// in memory without touching the filesystem.
CorpusManifest describe_corpus(std::span<const Utterance> utterances, std::span<const Split> splits,
                               std::uint64_t seed, std::array<double, 3> split_ratios);

CorpusManifest write_corpus(std::span<const Utterance> utterances, const std::filesystem::path& dir,
                            std::array<double, 3> split_ratios, std::uint64_t seed);

/// Sequential reader over one split file.
class RecordStream {
 public:
  RecordStream(const std::filesystem::path& file, Split split, FeatureDims dims);
  std::optional<LogRecord> next();

 private:
  std::filesystem::path file_;
  std::ifstream in_;
  Split split_;
  FeatureDims dims_;
  std::size_t line_ = 0;
};

/// Opens a corpus directory, validating the manifest version and the split
/// checksums (a streaming pass, constant memory).
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& dir);

  const CorpusManifest& manifest() const noexcept { return manifest_; }
  RecordStream open(Split split) const;
  /// Loads one split as utterances; needs both outcomes on every record.
  std::vector<Utterance> load_utterances(Split split) const;
  std::vector<LogRecord> load_records(Split split) const;

 private:
  std::filesystem::path dir_;
  CorpusManifest manifest_;
};

inline CorpusReader read_corpus(const std::filesystem::path& dir) { return CorpusReader(dir); }

std::string fnv1a64_hex(std::string_view bytes);

}  // namespace aep
