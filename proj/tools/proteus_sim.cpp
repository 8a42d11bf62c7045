#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "proteus/host/scenario.hpp"
#include "proteus/host/supervisor.hpp"
#include "proteus/reconfig_part.hpp"

namespace fs = std::filesystem;
using namespace proteus;

namespace {

std::vector<std::string> split_words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

int cmd_run(const std::string& scenario_path, const std::string& trace_path, const std::string& metrics_path,
            std::uint64_t seed, const std::string& workdir)
{
    host::Scenario sc;
    try {
        sc = host::load_scenario(scenario_path);
    } catch (const host::ParseError& e) {
        std::cerr << scenario_path << ":" << e.line() << ":" << e.column() << ": " << e.detail() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    host::RunOptions opt;
    opt.seed = seed;
    opt.trace = !trace_path.empty();
    opt.work_dir = workdir.empty() ? fs::path(scenario_path).parent_path() : fs::path(workdir);
    if (opt.work_dir.empty()) opt.work_dir = ".";

    host::RunResult r = host::run_scenario(sc, opt);
    for (const auto& m : r.messages) std::cerr << m << "\n";
    try {
        if (!metrics_path.empty()) {
            host::emit_metrics(r.metrics, metrics_path);
        } else {
            std::cout << host::format_metrics(r.metrics);
        }
        if (!trace_path.empty()) host::emit_trace(r.trace, trace_path);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return r.exit_status;
}

int cmd_kernels()
{
    for (const auto& k : reconfig::builtin_kernels()) {
        std::printf("0x%08x  %-10s %s\n", k.catalog_id, k.name.c_str(), k.description.c_str());
    }
    return 0;
}

int cmd_makebit(const std::vector<std::string>& args, const std::string& geometry, std::uint64_t seed)
{
    try {
        const host::MakebitCmd m = host::parse_makebit_args(args);
        const bitstream::DeviceGeometry g =
            geometry.empty() ? bitstream::DeviceGeometry{} : host::parse_geometry_args(split_words(geometry));
        if (m.cols.last >= g.columns) throw Error(ErrorCode::RegionOutOfBounds, "columns exceed the device");
        const auto bytes = host::make_bitstream(m, g, seed);
        std::ofstream f(m.out, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorCode::IoError, "cannot open " + m.out);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw Error(ErrorCode::IoError, "write failed for " + m.out);
        std::printf("%s: %zu bytes\n", m.out.c_str(), bytes.size());
    } catch (const host::ParseError& e) {
        std::cerr << "makebit: " << e.detail() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "makebit: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reconfigurable PCI coprocessor board simulator"};
    app.require_subcommand(1);

    std::string scenario, trace, metrics, workdir;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Execute a scenario script");
    run->add_option("scenario", scenario, "Scenario file")->required();
    run->add_option("--trace", trace, "Write a CSV event trace");
    run->add_option("--metrics", metrics, "Write key=value metrics (default: stdout)");
    run->add_option("--seed", seed, "Seed for fill=random");
    run->add_option("--workdir", workdir, "Directory for scenario file paths (default: the scenario's)");

    app.add_subcommand("kernels", "List built-in kernels");

    std::vector<std::string> mk_args;
    std::string geometry;
    std::uint64_t mk_seed = 0;
    auto* mk = app.add_subcommand("makebit", "Write a .pbit file");
    mk->add_option("args", mk_args, "out=<path> kind=<full|partial> id=<hex32> cols=<a>..<b> fill=<hex8|random[:seed]>")
        ->required();
    mk->add_option("--geometry", geometry, "e.g. \"cols=16 frames=32 fbytes=64 fixed=12..15\"");
    mk->add_option("--seed", mk_seed, "Seed for fill=random");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (run->parsed()) return cmd_run(scenario, trace, metrics, seed, workdir);
    if (mk->parsed()) return cmd_makebit(mk_args, geometry, mk_seed);
    return cmd_kernels();
}
