#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rotmap {

// Base of every data, format, or contract failure raised by the library.
// The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ROTMAP_DEFINE_ERROR(Name) \
    class Name : public Error {   \
    public:                       \
        using Error::Error;       \
    }

// Malformed XML; carries the expat position of the failure.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

ROTMAP_DEFINE_ERROR(SchemaError);
ROTMAP_DEFINE_ERROR(DegenerateGeometry);
ROTMAP_DEFINE_ERROR(EmptyShape);
ROTMAP_DEFINE_ERROR(FormatError);
ROTMAP_DEFINE_ERROR(AlignmentError);
ROTMAP_DEFINE_ERROR(NoDataError);
ROTMAP_DEFINE_ERROR(ManifestError);
ROTMAP_DEFINE_ERROR(AmbiguityError);
ROTMAP_DEFINE_ERROR(EmptyInput);
ROTMAP_DEFINE_ERROR(DataError);
ROTMAP_DEFINE_ERROR(ClusterError);
ROTMAP_DEFINE_ERROR(UndefinedCorrelation);
ROTMAP_DEFINE_ERROR(MetricsError);
ROTMAP_DEFINE_ERROR(CvError);
ROTMAP_DEFINE_ERROR(MapError);
ROTMAP_DEFINE_ERROR(ModelError);
ROTMAP_DEFINE_ERROR(ConfigError);
ROTMAP_DEFINE_ERROR(IoError);

#undef ROTMAP_DEFINE_ERROR

}  // namespace rotmap
