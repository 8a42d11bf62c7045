#include "proteus/trace.hpp"

#include <fstream>

#include "proteus/error.hpp"

namespace proteus {

namespace {

bool needs_quoting(std::string_view field)
{
    return field.find_first_of(",\" \t\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view field)
{
    if (!needs_quoting(field)) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

}  // namespace

std::string format_trace_csv(const std::vector<TraceRecord>& records)
{
    std::string out = "time_ps,component,event,detail\n";
    for (const auto& r : records) {
        out += std::to_string(r.time_ps);
        out.push_back(',');
        append_field(out, r.component);
        out.push_back(',');
        append_field(out, r.event);
        out.push_back(',');
        append_field(out, r.detail);
        out.push_back('\n');
    }
    return out;
}

void write_trace_csv(const std::vector<TraceRecord>& records, const std::filesystem::path& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    const std::string text = format_trace_csv(records);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace proteus
