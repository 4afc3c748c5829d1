#pragma once

// Plain-text formats: UTF-8, comma separated, '.' decimal point, doubles in
// shortest round-trip form so save/load is bit exact.
//
//   scored dataset   id,true_label,human_pred,noise_tag,f_0,...,f_{L-1}
//   confusion        L rows of L values; row = predicted label, column = truth
//   prob vector      one row of L values
//   calibrator       rank,bin,lower,upper,value
//   graph            first line n, then one "u v" pair per line (zero-based)
//   results          method,config_hash,run,metric,value
//   instances        method,config_hash,run,id,true_label,confuser,set,accuracy

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "predset/calibration.hpp"
#include "predset/core.hpp"
#include "predset/hardness.hpp"

namespace predset {

std::string format_double(double v);
double parse_double(std::string_view text);
std::size_t parse_size(std::string_view text);
std::vector<std::string> split_fields(std::string_view line, char sep = ',');

Dataset load_scored_dataset(const std::filesystem::path& path,
                            double tolerance = kIngestSumTolerance);
void save_scored_dataset(const std::filesystem::path& path, const Dataset& ds);

Graph load_graph(const std::filesystem::path& path);
Graph parse_graph(std::string_view text);
void save_graph(const std::filesystem::path& path, const Graph& g);

ConfusionMatrix load_confusion(const std::filesystem::path& path,
                               double tolerance = kIngestSumTolerance);
void save_confusion(const std::filesystem::path& path, const ConfusionMatrix& c);

ProbVector load_prob_vector(const std::filesystem::path& path,
                            double tolerance = kIngestSumTolerance);
void save_prob_vector(const std::filesystem::path& path, const ProbVector& f);

TopKCalibrator load_calibrator(const std::filesystem::path& path);
void save_calibrator(const std::filesystem::path& path, const TopKCalibrator& cal);

struct ResultRecord {
  std::string method;
  std::string config_hash;
  std::size_t run = 0;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

// Rows are sorted by (method, config_hash, run, metric) before writing.
void write_results(const std::filesystem::path& path, std::vector<ResultRecord> records);
std::vector<ResultRecord> read_results(const std::filesystem::path& path);

struct InstanceResult {
  std::string method;
  std::string config_hash;
  std::size_t run = 0;
  std::string id;
  LabelId true_label = 0;
  LabelId confuser = 0;  // most frequent mistake for the true label
  PredictionSet set;
  double accuracy = 0.0;
};

void write_instances(const std::filesystem::path& path, const std::vector<InstanceResult>& rows);
std::vector<InstanceResult> read_instances(const std::filesystem::path& path);

// Whole-file helpers shared with the CLI.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace predset
