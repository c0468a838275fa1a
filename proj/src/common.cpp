#include "grideta/common.hpp"

namespace grideta {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::degenerate_segment: return "DegenerateSegment";
    case Errc::non_positive_duration: return "NonPositiveDuration";
    case Errc::bad_config: return "BadConfig";
    case Errc::bad_window: return "BadWindow";
    case Errc::bad_record: return "BadRecord";
    case Errc::bad_k: return "BadK";
    case Errc::empty_trajectory: return "EmptyTrajectory";
    case Errc::empty_profile: return "EmptyProfile";
    case Errc::empty_route: return "EmptyRoute";
    case Errc::empty_file: return "EmptyFile";
    case Errc::empty_group_set: return "EmptyGroupSet";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::insufficient_graph: return "InsufficientGraph";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::width_mismatch: return "WidthMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::model_grid_mismatch: return "ModelGridMismatch";
    case Errc::stale_cache: return "StaleCache";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_error: return "SchemaError";
    case Errc::too_few: return "TooFew";
    case Errc::zero_truth: return "ZeroTruth";
  }
  return "Error";
}

}  // namespace grideta
