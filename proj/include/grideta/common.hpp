#pragma once

#include <stdexcept>
#include <string>

namespace grideta {

enum class Errc {
  out_of_bounds,
  degenerate_segment,
  non_positive_duration,
  bad_config,
  bad_window,
  bad_record,
  bad_k,
  empty_trajectory,
  empty_profile,
  empty_route,
  empty_file,
  empty_group_set,
  insufficient_data,
  insufficient_graph,
  shape_mismatch,
  width_mismatch,
  length_mismatch,
  model_grid_mismatch,
  stale_cache,
  parse_error,
  schema_error,
  too_few,
  zero_truth,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace grideta
