// Shared error types and small utilities used across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace csid {

// Coarse failure class, used by the CLI to pick an exit code.
enum class error_category { usage, data, numeric };

class error : public std::runtime_error {
public:
    error(error_category cat, const std::string& what) : std::runtime_error(what), cat_(cat) {}
    error_category category() const noexcept { return cat_; }

private:
    error_category cat_;
};

#define CSID_DEFINE_ERROR(name, cat)                                              \
    class name : public error {                                                   \
    public:                                                                       \
        explicit name(const std::string& what) : error(error_category::cat, what) {} \
    }

CSID_DEFINE_ERROR(argument_error, usage);
CSID_DEFINE_ERROR(registry_error, usage);
CSID_DEFINE_ERROR(metric_error, usage);
CSID_DEFINE_ERROR(decode_error, data);
CSID_DEFINE_ERROR(format_error, data);
CSID_DEFINE_ERROR(geometry_error, data);
CSID_DEFINE_ERROR(labeling_error, data);
CSID_DEFINE_ERROR(dataset_error, data);
CSID_DEFINE_ERROR(coverage_error, data);
CSID_DEFINE_ERROR(insufficient_data_error, data);
CSID_DEFINE_ERROR(degenerate_class_error, data);
CSID_DEFINE_ERROR(stratification_error, data);
CSID_DEFINE_ERROR(bundle_mismatch_error, data);
CSID_DEFINE_ERROR(singular_system_error, numeric);
CSID_DEFINE_ERROR(fit_failure_error, numeric);

#undef CSID_DEFINE_ERROR

} // namespace csid
