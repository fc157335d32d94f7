#pragma once

#include <stdexcept>
#include <string>

namespace diginfer {

// Exit-code categories: config errors -> 2, data errors -> 3, numeric failures -> 4.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct missing_file : data_error {
  explicit missing_file(const std::string& path)
      : data_error("missing or unreadable file: " + path) {}
};

struct degenerate_split : data_error {
  using data_error::data_error;
};

struct cluster_too_small : data_error {
  using data_error::data_error;
};

struct no_excavator_data : data_error {
  using data_error::data_error;
};

struct id_mismatch : data_error {
  using data_error::data_error;
};

struct too_few_points : data_error {
  using data_error::data_error;
};

struct not_positive_definite : numeric_error {
  using numeric_error::numeric_error;
};

struct all_starts_failed : numeric_error {
  using numeric_error::numeric_error;
};

}  // namespace diginfer
