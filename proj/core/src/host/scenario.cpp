#include "proteus/host/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "proteus/host/metrics.hpp"
#include "proteus/reconfig_part.hpp"

namespace proteus::host {

namespace fs = std::filesystem;

ParseError::ParseError(int line, int column, const std::string& message)
    : Error(ErrorCode::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message)
{
}

namespace {

/// Thrown by value parsers; the caller attaches the position.
struct BadValue {
    std::string message;
};

template <typename T>
T parse_unsigned(std::string_view s, int base = 10)
{
    T v{};
    if (s.empty()) throw BadValue{"expected a number"};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec == std::errc::result_out_of_range) throw BadValue{"number out of range: " + std::string(s)};
    if (ec != std::errc{} || p != s.data() + s.size()) throw BadValue{"not a number: " + std::string(s)};
    return v;
}

template <typename T>
T dec(std::string_view s)
{
    return parse_unsigned<T>(s);
}

bool is_hex_digits(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

std::string_view strip_0x(std::string_view s)
{
    if (s.size() >= 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
    return s;
}

std::string hex(std::uint32_t v, int width)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%0*x", width, v);
    return buf;
}

std::int64_t unit_ps(std::string_view unit)
{
    if (unit == "ns") return sim::kNanosecond;
    if (unit == "us") return sim::kMicrosecond;
    if (unit == "ms") return sim::kMillisecond;
    return 0;
}

sim::Ticks time_value(std::string_view text)
{
    if (text.size() < 3) throw BadValue{"expected <number><ns|us|ms>, got '" + std::string(text) + "'"};
    const std::int64_t mult = unit_ps(text.substr(text.size() - 2));
    if (mult == 0) throw BadValue{"time needs an ns, us or ms suffix: '" + std::string(text) + "'"};
    std::string_view num = text.substr(0, text.size() - 2);
    std::string_view whole = num, frac;
    if (auto dot = num.find('.'); dot != std::string_view::npos) {
        whole = num.substr(0, dot);
        frac = num.substr(dot + 1);
        if (frac.empty()) throw BadValue{"malformed time '" + std::string(text) + "'"};
    }
    const auto w = parse_unsigned<std::uint64_t>(whole);
    std::int64_t frac_ps = 0;
    if (!frac.empty()) {
        const auto f = parse_unsigned<std::uint64_t>(frac);
        if (frac.size() > 12) throw BadValue{"too many decimals in '" + std::string(text) + "'"};
        std::int64_t scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        const std::int64_t num_ps = static_cast<std::int64_t>(f) * mult;
        if (num_ps % scale != 0) throw BadValue{"'" + std::string(text) + "' is not a whole number of picoseconds"};
        frac_ps = num_ps / scale;
    }
    constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();
    if (w > static_cast<std::uint64_t>((kMax - frac_ps) / mult)) throw BadValue{"time out of range: " + std::string(text)};
    return static_cast<std::int64_t>(w) * mult + frac_ps;
}

std::uint32_t hex32_value(std::string_view text)
{
    std::string_view digits = strip_0x(text);
    if (!is_hex_digits(digits) || digits.size() > 8) throw BadValue{"expected a 32-bit hex value, got '" + std::string(text) + "'"};
    return parse_unsigned<std::uint32_t>(digits, 16);
}

ColumnRange range_value(std::string_view text)
{
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) throw BadValue{"expected <a>..<b>, got '" + std::string(text) + "'"};
    ColumnRange r;
    r.first = parse_unsigned<std::uint16_t>(text.substr(0, dots));
    r.last = parse_unsigned<std::uint16_t>(text.substr(dots + 2));
    if (r.last < r.first) throw BadValue{"empty range '" + std::string(text) + "'"};
    return r;
}

struct Token {
    std::string_view text;
    int column = 0;  // 1-based
};

std::vector<Token> tokenize(std::string_view line)
{
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<Token> out;
    std::size_t i = 0;
    auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; };
    while (i < line.size()) {
        while (i < line.size() && space(line[i])) ++i;
        const std::size_t start = i;
        while (i < line.size() && !space(line[i])) ++i;
        if (i > start) out.push_back(Token{line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

/// key=value arguments of one command line.
class Args {
public:
    Args(int line, const std::vector<Token>& tokens) : line_(line), command_col_(tokens.front().column)
    {
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const Token& t = tokens[i];
            const auto eq = t.text.find('=');
            if (eq == std::string_view::npos || eq == 0) {
                throw ParseError(line_, t.column, "expected key=value, got '" + std::string(t.text) + "'");
            }
            const std::string key(t.text.substr(0, eq));
            if (args_.count(key)) throw ParseError(line_, t.column, "duplicate argument '" + key + "'");
            const Token value{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
            if (value.text.empty()) throw ParseError(line_, value.column, "empty value for '" + key + "'");
            args_.emplace(key, Entry{t.column, value});
        }
    }

    bool has(const std::string& key) const { return args_.count(key) != 0; }

    Token require(const std::string& key)
    {
        auto it = args_.find(key);
        if (it == args_.end()) throw ParseError(line_, command_col_, "missing argument '" + key + "'");
        return take(it);
    }

    std::optional<Token> optional(const std::string& key)
    {
        auto it = args_.find(key);
        if (it == args_.end()) return std::nullopt;
        return take(it);
    }

    /// Rejects leftovers, reporting the leftmost.
    void finish() const
    {
        const Entry* first = nullptr;
        std::string name;
        for (const auto& [key, e] : args_) {
            if (!first || e.key_column < first->key_column) {
                first = &e;
                name = key;
            }
        }
        if (first) throw ParseError(line_, first->key_column, "unknown argument '" + name + "'");
    }

    template <typename Fn>
    auto value(const Token& t, Fn&& fn) const
    {
        try {
            return fn(t.text);
        } catch (const BadValue& b) {
            throw ParseError(line_, t.column, b.message);
        }
    }

    int line() const { return line_; }
    int command_column() const { return command_col_; }

private:
    struct Entry {
        int key_column;
        Token value;
    };

    Token take(std::map<std::string, Entry>::iterator it)
    {
        Token t = it->second.value;
        args_.erase(it);
        return t;
    }

    int line_;
    int command_col_;
    std::map<std::string, Entry> args_;
};

bitstream::DeviceGeometry geometry_from(Args& a)
{
    bitstream::DeviceGeometry g;
    if (auto t = a.optional("cols")) g.columns = a.value(*t, dec<std::uint16_t>);
    if (auto t = a.optional("frames")) g.frames_per_column = a.value(*t, dec<std::uint16_t>);
    if (auto t = a.optional("fbytes")) g.bytes_per_frame = a.value(*t, dec<std::uint16_t>);
    if (auto t = a.optional("fixed")) {
        const ColumnRange r = a.value(*t, range_value);
        g.fixed_first = r.first;
        g.fixed_last = r.last;
    } else if (g.columns != bitstream::DeviceGeometry{}.columns) {
        // fixed defaults to the top four columns
        g.fixed_last = static_cast<std::uint16_t>(g.columns > 0 ? g.columns - 1 : 0);
        g.fixed_first = static_cast<std::uint16_t>(g.columns > 4 ? g.columns - 4 : 0);
    }
    a.finish();
    try {
        g.validate();
    } catch (const Error& e) {
        throw ParseError(a.line(), a.command_column(), std::string("invalid geometry: ") + e.what());
    }
    return g;
}

std::uint8_t hex8_value(std::string_view text)
{
    std::string_view d = strip_0x(text);
    if (!is_hex_digits(d) || d.size() > 2) throw BadValue{"fill must be a hex byte or random[:seed], got '" + std::string(text) + "'"};
    return parse_unsigned<std::uint8_t>(d, 16);
}

MakebitCmd makebit_from(Args& a, Token* out_token = nullptr, Token* cols_token = nullptr)
{
    MakebitCmd m;
    const Token out = a.require("out");
    if (out_token) *out_token = out;
    m.out = std::string(out.text);
    const Token kind = a.require("kind");
    if (kind.text == "full") {
        m.kind = bitstream::Kind::Full;
    } else if (kind.text == "partial") {
        m.kind = bitstream::Kind::Partial;
    } else {
        throw ParseError(a.line(), kind.column, "kind must be full or partial");
    }
    m.id = a.value(a.require("id"), hex32_value);
    const Token cols = a.require("cols");
    if (cols_token) *cols_token = cols;
    m.cols = a.value(cols, range_value);
    const Token fill = a.require("fill");
    m.fill = a.value(fill, [](std::string_view s) -> std::variant<std::uint8_t, RandomFill> {
        if (s == "random") return RandomFill{};
        if (s.rfind("random:", 0) == 0) return RandomFill{parse_unsigned<std::uint64_t>(s.substr(7))};
        return hex8_value(s);
    });
    a.finish();
    return m;
}

void check_columns(const ColumnRange& r, const bitstream::DeviceGeometry& g, int line, int column)
{
    if (r.last >= g.columns) {
        throw ParseError(line, column,
                         "columns " + std::to_string(r.first) + ".." + std::to_string(r.last) + " exceed a " +
                             std::to_string(g.columns) + "-column device");
    }
}

struct ParsedLine {
    int number;
    std::vector<Token> tokens;
};

}  // namespace

sim::Ticks parse_time(std::string_view text)
{
    try {
        return time_value(text);
    } catch (const BadValue& b) {
        throw Error(ErrorCode::InvalidArgument, b.message);
    }
}

std::string format_time(sim::Ticks ps)
{
    if (ps != 0) {
        if (ps % sim::kMillisecond == 0) return std::to_string(ps / sim::kMillisecond) + "ms";
        if (ps % sim::kMicrosecond == 0) return std::to_string(ps / sim::kMicrosecond) + "us";
        if (ps % sim::kNanosecond == 0) return std::to_string(ps / sim::kNanosecond) + "ns";
    }
    // sub-nanosecond remainder: write as a decimal number of nanoseconds
    const auto whole = ps / sim::kNanosecond;
    auto frac = std::to_string(ps % sim::kNanosecond);
    if (ps == 0) return "0ns";
    frac.insert(0, 3 - frac.size(), '0');
    while (frac.back() == '0') frac.pop_back();
    return std::to_string(whole) + "." + frac + "ns";
}

std::uint32_t parse_hex32(std::string_view text)
{
    try {
        return hex32_value(text);
    } catch (const BadValue& b) {
        throw Error(ErrorCode::InvalidArgument, b.message);
    }
}

Scenario parse_scenario(std::string_view text, const fs::path& base_dir)
{
    std::vector<ParsedLine> lines;
    {
        int number = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++number;
            auto tokens = tokenize(raw);
            if (!tokens.empty()) lines.push_back(ParsedLine{number, std::move(tokens)});
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
    }

    Scenario sc;

    // Board-level settings apply to the whole run wherever they appear.
    for (const auto& l : lines) {
        const Token& cmd = l.tokens.front();
        if (cmd.text == "geometry") {
            if (sc.geometry) throw ParseError(l.number, cmd.column, "geometry given twice");
            Args a(l.number, l.tokens);
            sc.geometry = geometry_from(a);
        } else if (cmd.text == "bus") {
            if (sc.bus) throw ParseError(l.number, cmd.column, "bus given twice");
            Args a(l.number, l.tokens);
            BusOverride b;
            if (auto t = a.optional("grant")) b.grant_latency_cycles = a.value(*t, dec<std::uint32_t>);
            if (auto t = a.optional("burst")) {
                b.max_burst_cycles = a.value(*t, dec<std::uint32_t>);
                if (*b.max_burst_cycles == 0) throw ParseError(l.number, t->column, "burst must be at least 1");
            }
            a.finish();
            if (!b.grant_latency_cycles && !b.max_burst_cycles) {
                throw ParseError(l.number, cmd.column, "bus needs grant= or burst=");
            }
            sc.bus = b;
        }
    }
    const bitstream::DeviceGeometry geom = sc.effective_geometry();

    std::set<fs::path> produced;
    auto resolve = [&](std::string_view p) { return (base_dir / fs::path(std::string(p))).lexically_normal(); };
    auto need_input = [&](const Args& a, const Token& t) {
        const fs::path p = resolve(t.text);
        if (produced.count(p)) return;
        std::error_code ec;
        if (!fs::is_regular_file(p, ec)) throw ParseError(a.line(), t.column, "file not found: " + std::string(t.text));
    };
    auto output = [&](const Token& t) { produced.insert(resolve(t.text)); };

    for (const auto& l : lines) {
        const Token& cmd = l.tokens.front();
        if (cmd.text == "geometry" || cmd.text == "bus") continue;
        if (cmd.text == "expect") {
            if (l.tokens.size() != 4) {
                throw ParseError(l.number, cmd.column, "expect takes <key> <op> <number>");
            }
            ExpectCmd e;
            const Token& key = l.tokens[1];
            const Token& op = l.tokens[2];
            const Token& num = l.tokens[3];
            e.key = std::string(key.text);
            const auto& keys = numeric_metric_keys();
            if (std::find(keys.begin(), keys.end(), e.key) == keys.end()) {
                throw ParseError(l.number, key.column, "unknown metric '" + e.key + "'");
            }
            if (op.text == "<=") {
                e.op = Compare::LessEqual;
            } else if (op.text == ">=") {
                e.op = Compare::GreaterEqual;
            } else if (op.text == "==") {
                e.op = Compare::Equal;
            } else {
                throw ParseError(l.number, op.column, "operator must be <=, >= or ==");
            }
            double v = 0;
            auto [p, ec] = std::from_chars(num.text.data(), num.text.data() + num.text.size(), v);
            if (ec != std::errc{} || p != num.text.data() + num.text.size() || !std::isfinite(v)) {
                throw ParseError(l.number, num.column, "not a number: " + std::string(num.text));
            }
            e.value = v;
            e.value_text = std::string(num.text);
            sc.commands.push_back(Command{e, l.number});
            continue;
        }

        Args a(l.number, l.tokens);
        if (cmd.text == "boot") {
            const Token f = a.require("flash");
            a.finish();
            need_input(a, f);
            sc.commands.push_back(Command{BootCmd{std::string(f.text)}, l.number});
        } else if (cmd.text == "bind") {
            BindCmd b;
            b.id = a.value(a.require("id"), hex32_value);
            const Token k = a.require("kernel");
            a.finish();
            if (!reconfig::find_builtin(k.text)) throw ParseError(l.number, k.column, "unknown kernel '" + std::string(k.text) + "'");
            b.kernel = std::string(k.text);
            sc.commands.push_back(Command{b, l.number});
        } else if (cmd.text == "makebit") {
            Token out, cols;
            MakebitCmd m = makebit_from(a, &out, &cols);
            check_columns(m.cols, geom, l.number, cols.column);
            if (m.kind == bitstream::Kind::Full && (m.cols.first != 0 || m.cols.last + 1 != geom.columns)) {
                throw ParseError(l.number, cols.column, "a full image must cover columns 0.." + std::to_string(geom.columns - 1));
            }
            output(out);
            sc.commands.push_back(Command{m, l.number});
        } else if (cmd.text == "reconfig") {
            const Token f = a.require("file");
            a.finish();
            need_input(a, f);
            sc.commands.push_back(Command{ReconfigCmd{std::string(f.text)}, l.number});
        } else if (cmd.text == "readback") {
            const Token cols = a.require("cols");
            const Token out = a.require("out");
            a.finish();
            ReadbackCmd r{a.value(cols, range_value), std::string(out.text)};
            check_columns(r.cols, geom, l.number, cols.column);
            output(out);
            sc.commands.push_back(Command{r, l.number});
        } else if (cmd.text == "stream") {
            const Token in = a.require("in");
            const Token out = a.require("out");
            const Token words = a.require("words");
            a.finish();
            StreamCmd s{std::string(in.text), std::string(out.text), a.value(words, dec<std::uint32_t>)};
            if (s.words == 0 || s.words > (1u << 26)) throw ParseError(l.number, words.column, "words must be 1..67108864");
            need_input(a, in);
            output(out);
            sc.commands.push_back(Command{s, l.number});
        } else if (cmd.text == "stall") {
            const Token at = a.require("at");
            const Token dur = a.require("for");
            a.finish();
            StallCmd s{a.value(at, time_value), a.value(dur, time_value)};
            if (s.duration == 0) throw ParseError(l.number, dur.column, "stall duration must be positive");
            sc.commands.push_back(Command{s, l.number});
        } else {
            throw ParseError(l.number, cmd.column, "unknown command '" + std::string(cmd.text) + "'");
        }
    }
    return sc;
}

Scenario load_scenario(const fs::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string_view command_name(const CommandBody& body)
{
    static constexpr std::string_view names[] = {"boot", "bind", "makebit", "reconfig", "readback", "stream", "stall", "expect"};
    return names[body.index()];
}

namespace {

std::string range_text(const ColumnRange& r) { return std::to_string(r.first) + ".." + std::to_string(r.last); }

struct Formatter {
    std::string operator()(const BootCmd& c) const { return "boot flash=" + c.flash; }
    std::string operator()(const BindCmd& c) const { return "bind id=" + hex(c.id, 8) + " kernel=" + c.kernel; }
    std::string operator()(const MakebitCmd& c) const
    {
        std::string fill;
        if (const auto* byte = std::get_if<std::uint8_t>(&c.fill)) {
            fill = hex(*byte, 2);
        } else {
            const auto& r = std::get<RandomFill>(c.fill);
            fill = r.seed ? "random:" + std::to_string(*r.seed) : "random";
        }
        return "makebit out=" + c.out + " kind=" + (c.kind == bitstream::Kind::Full ? "full" : "partial") +
               " id=" + hex(c.id, 8) + " cols=" + range_text(c.cols) + " fill=" + fill;
    }
    std::string operator()(const ReconfigCmd& c) const { return "reconfig file=" + c.file; }
    std::string operator()(const ReadbackCmd& c) const { return "readback cols=" + range_text(c.cols) + " out=" + c.out; }
    std::string operator()(const StreamCmd& c) const
    {
        return "stream in=" + c.in + " out=" + c.out + " words=" + std::to_string(c.words);
    }
    std::string operator()(const StallCmd& c) const
    {
        return "stall at=" + format_time(c.at) + " for=" + format_time(c.duration);
    }
    std::string operator()(const ExpectCmd& c) const
    {
        static constexpr const char* ops[] = {"<=", ">=", "=="};
        return "expect " + c.key + " " + ops[static_cast<int>(c.op)] + " " + c.value_text;
    }
};

}  // namespace

std::string format_command(const CommandBody& body) { return std::visit(Formatter{}, body); }

std::string format_scenario(const Scenario& sc)
{
    std::string out;
    if (sc.geometry) {
        const auto& g = *sc.geometry;
        out += "geometry cols=" + std::to_string(g.columns) + " frames=" + std::to_string(g.frames_per_column) +
               " fbytes=" + std::to_string(g.bytes_per_frame) + " fixed=" + std::to_string(g.fixed_first) + ".." +
               std::to_string(g.fixed_last) + "\n";
    }
    if (sc.bus) {
        out += "bus";
        if (sc.bus->grant_latency_cycles) out += " grant=" + std::to_string(*sc.bus->grant_latency_cycles);
        if (sc.bus->max_burst_cycles) out += " burst=" + std::to_string(*sc.bus->max_burst_cycles);
        out += "\n";
    }
    for (const auto& c : sc.commands) out += format_command(c.body) + "\n";
    return out;
}

namespace {

std::vector<Token> cli_tokens(const std::string& command, const std::vector<std::string>& args)
{
    std::vector<Token> t{Token{command, 1}};
    int col = static_cast<int>(command.size()) + 2;
    for (const auto& a : args) {
        t.push_back(Token{a, col});
        col += static_cast<int>(a.size()) + 1;
    }
    return t;
}

}  // namespace

MakebitCmd parse_makebit_args(const std::vector<std::string>& args)
{
    const auto tokens = cli_tokens("makebit", args);
    Args a(1, tokens);
    return makebit_from(a);
}

bitstream::DeviceGeometry parse_geometry_args(const std::vector<std::string>& args)
{
    const auto tokens = cli_tokens("geometry", args);
    Args a(1, tokens);
    return geometry_from(a);
}

}  // namespace proteus::host
