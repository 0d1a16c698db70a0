#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "caba/config.hpp"
#include "caba/isa.hpp"
#include "caba/metrics.hpp"
#include "caba/sim.hpp"

namespace {

using namespace caba;

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& sets) {
    RunConfig rc;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f)
            throw std::invalid_argument("cannot open config file: " + config_path);
        rc = parse_config(f);
    }
    for (const std::string& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        apply_setting(rc, s.substr(0, eq), s.substr(eq + 1));
    }
    return rc;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

// Rows carry the run identity ahead of the fixed metrics schema.
std::string labeled_header() {
    return "label,algorithm,profile,pattern," + metrics_csv_header();
}

std::string labeled_row(const RunConfig& rc, const RunMetrics& m) {
    return csv_field(rc.label) + "," + algorithm_name(rc) + "," +
           to_string(rc.workload.profile) + "," + to_string(rc.workload.pattern) +
           "," + metrics_csv_row(m);
}

void append_csv(const std::string& path, const std::string& row) {
    bool fresh = !std::filesystem::exists(path) ||
                 std::filesystem::file_size(path) == 0;
    std::ofstream f(path, std::ios::app);
    if (!f)
        throw std::runtime_error("cannot open csv file: " + path);
    if (fresh)
        f << labeled_header() << "\n";
    f << row << "\n";
}

void print_summary(const RunConfig& rc, const RunMetrics& m) {
    auto pct = [&](uint64_t part) {
        double t = double(m.breakdown.total());
        return t > 0 ? 100.0 * double(part) / t : 0.0;
    };
    std::cout << std::fixed << std::setprecision(3);
    std::cout << "run        " << rc.label << " [" << algorithm_name(rc) << ", "
              << to_string(rc.workload.profile) << ", "
              << to_string(rc.workload.pattern) << "]\n"
              << "cycles     " << m.cycles << "  (ipc " << m.ipc << ")\n"
              << "instr      parent " << m.parent_instructions << ", assist "
              << m.assist_instructions << "\n"
              << std::setprecision(1)  //
              << "slots      active " << pct(m.breakdown.active) << "%, memory "
              << pct(m.breakdown.memory) << "%, compute "
              << pct(m.breakdown.compute) << "%, depend "
              << pct(m.breakdown.data_dependence) << "%, idle "
              << pct(m.breakdown.idle) << "%\n"
              << "l1         " << m.l1_hits << " hits / " << m.l1_misses
              << " misses\n"
              << "l2         " << m.l2_hits << " hits / " << m.l2_misses
              << " misses\n"
              << "dram       " << m.dram_reads << " reads, " << m.dram_writes
              << " writes\n"
              << "bus        " << m.data_bursts << " data bursts ("
              << m.raw_equivalent_bursts << " raw-equivalent), " << m.md_miss_bursts
              << " metadata bursts, busy " << m.busy_cycles << "\n"
              << std::setprecision(4)  //
              << "bandwidth  " << m.bandwidth_utilization << " utilization, "
              << m.compression_ratio << " compression ratio\n"
              << "metadata   " << m.md_lookups << " lookups, hit rate "
              << m.md_hit_rate << "\n"
              << "assists    " << m.triggers.attempts << " attempts, "
              << m.triggers.deployed << " deployed, " << m.triggers.completed
              << " completed, " << m.triggers.killed << " killed, "
              << m.triggers.rejected_busy << "+" << m.triggers.rejected_full
              << " rejected\n";
}

struct SimulateOpts {
    std::string config, trace_in, trace_out, csv, load_mem, dump_mem;
    std::vector<std::string> sets;
    uint64_t trace_cycles = 0;
};

int run_simulate(const SimulateOpts& o) {
    RunConfig rc = load_run_config(o.config, o.sets);
    validate(rc);

    std::vector<TraceOp> trace;
    if (!o.trace_in.empty()) {
        std::ifstream f(o.trace_in);
        if (!f)
            throw std::invalid_argument("cannot open trace file: " + o.trace_in);
        trace = parse_trace(f);
    } else {
        trace = generate_workload(rc.workload, rc.sim.codec.line_size);
    }
    if (!o.trace_out.empty()) {
        std::ofstream f(o.trace_out);
        if (!f)
            throw std::runtime_error("cannot open trace output: " + o.trace_out);
        write_trace(f, trace);
    }

    Simulator sim(rc.sim, rc.workload, std::move(trace));
    if (!o.load_mem.empty()) {
        std::ifstream f(o.load_mem);
        if (!f)
            throw std::invalid_argument("cannot open memory image: " + o.load_mem);
        sim.memory().image().load(f);
    }
    if (o.trace_cycles > 0)
        sim.set_cycle_trace(&std::cout, o.trace_cycles);

    RunMetrics m = sim.run();

    if (!o.dump_mem.empty()) {
        std::ofstream f(o.dump_mem);
        if (!f)
            throw std::runtime_error("cannot open memory dump: " + o.dump_mem);
        sim.memory().image().dump(f);
    }
    print_summary(rc, m);
    if (!o.csv.empty())
        append_csv(o.csv, labeled_row(rc, m));
    return 0;
}

struct CompressOpts {
    std::string algorithm = "best", profile = "mixed";
    uint64_t lines = 8, seed = 1;
    uint32_t line_size = 128;
};

int run_compress(const CompressOpts& o) {
    auto prof = profile_from_string(o.profile);
    if (!prof)
        throw std::invalid_argument("unknown data profile '" + o.profile + "'");
    CodecConfig codec;
    codec.line_size = o.line_size;

    auto encode = [&](std::span<const uint8_t> raw) {
        if (o.algorithm == "best")
            return best_of_all(raw, codec);
        if (o.algorithm == "bdi")
            return bdi_compress(raw, codec);
        if (o.algorithm == "fpc")
            return fpc_compress(raw, codec);
        if (o.algorithm == "cpack")
            return cpack_compress(raw, codec);
        if (o.algorithm == "none")
            return store_raw(raw, codec);
        throw std::invalid_argument("unknown algorithm '" + o.algorithm +
                                    "' (expected none, bdi, fpc, cpack, or best)");
    };

    uint64_t total_bursts = 0, raw_bursts = 0;
    std::cout << "line  algorithm  id    bytes  bursts (raw " << codec.line_size
              << "B = " << burst_count(codec.line_size, codec) << ")\n";
    for (uint64_t line = 0; line < o.lines; ++line) {
        std::vector<uint8_t> raw = line_data(line, *prof, o.seed, o.line_size);
        CompressedLine c = encode(raw);
        uint8_t id = c.compressed() ? encoding_id(c.algorithm, c.encoding) : 0;
        std::vector<uint8_t> back = decompress(c, codec);
        if (back != raw)
            throw std::runtime_error("round-trip mismatch on line " +
                                     std::to_string(line));
        uint32_t b = burst_count(c.total_size(), codec);
        total_bursts += b;
        raw_bursts += burst_count(codec.line_size, codec);
        const char* alg = c.compressed()
                              ? (c.algorithm == Algorithm::BDI     ? "bdi"
                                 : c.algorithm == Algorithm::FPC   ? "fpc"
                                 : c.algorithm == Algorithm::CPACK ? "cpack"
                                                                   : "?")
                              : "raw";
        std::cout << std::left << std::setw(6) << line << std::setw(11) << alg
                  << "0x" << std::setw(4) << std::hex << unsigned(id) << std::dec
                  << std::setw(7) << c.total_size() << b << "\n";
    }
    std::cout << std::fixed << std::setprecision(4) << "total " << total_bursts
              << " bursts for " << raw_bursts << " raw-equivalent (ratio "
              << (total_bursts ? double(raw_bursts) / double(total_bursts) : 1.0)
              << "), all lines verified round-trip\n";
    return 0;
}

struct SweepOpts {
    std::string config, csv;
    std::vector<std::string> sets;
    std::string algorithms = "absent,none,bdi,fpc,cpack,best";
    std::string profiles, patterns;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.push_back(tok);
    return out;
}

int run_sweep(const SweepOpts& o) {
    RunConfig base = load_run_config(o.config, o.sets);
    std::vector<std::string> algs = split_list(o.algorithms);
    std::vector<std::string> profiles =
        o.profiles.empty() ? std::vector<std::string>{to_string(base.workload.profile)}
                           : split_list(o.profiles);
    std::vector<std::string> patterns =
        o.patterns.empty() ? std::vector<std::string>{to_string(base.workload.pattern)}
                           : split_list(o.patterns);

    bool to_stdout = o.csv.empty();
    if (to_stdout)
        std::cout << labeled_header() << "\n";
    for (const std::string& alg : algs) {
        for (const std::string& prof : profiles) {
            for (const std::string& pat : patterns) {
                RunConfig rc = base;
                if (alg == "absent") {
                    apply_setting(rc, "caba_absent", "1");
                    apply_setting(rc, "algorithm", "none");
                } else {
                    apply_setting(rc, "algorithm", alg); // bad names throw
                }
                apply_setting(rc, "profile", prof);
                apply_setting(rc, "pattern", pat);
                try {
                    validate(rc);
                } catch (const std::invalid_argument& e) {
                    std::cerr << "skip " << alg << "/" << prof << "/" << pat << ": "
                              << e.what() << "\n";
                    continue;
                }
                Simulator sim(rc.sim, rc.workload);
                RunMetrics m = sim.run();
                std::string row = labeled_row(rc, m);
                if (to_stdout)
                    std::cout << row << "\n";
                else
                    append_csv(o.csv, row);
            }
        }
    }
    return 0;
}

struct DisasmOpts {
    uint32_t line_size = 128;
    std::string name;
};

int run_disasm(const DisasmOpts& o) {
    CodecConfig codec;
    codec.line_size = o.line_size;
    SubroutineLibrary lib = build_library(codec);
    bool any = false;
    for (const Subroutine& sr : lib.all()) {
        if (!o.name.empty() && sr.name.find(o.name) == std::string::npos)
            continue;
        any = true;
        std::cout << disassemble(sr) << "\n";
    }
    if (!any)
        throw std::invalid_argument("no subroutine matches '" + o.name + "'");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cycle-level model of a GPU SM slice whose assist warps "
                 "compress and decompress cache lines in transit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cabasim 1.0.0");

    SimulateOpts so;
    auto* sim = app.add_subcommand("simulate", "run one configuration");
    sim->add_option("-c,--config", so.config, "key=value configuration file");
    sim->add_option("-s,--set", so.sets, "override one key (key=value, repeatable)");
    sim->add_option("-t,--trace", so.trace_in, "input instruction trace (#cabatrace v1)");
    sim->add_option("--save-trace", so.trace_out, "write the executed trace here");
    sim->add_option("--trace-cycles", so.trace_cycles,
                    "print per-cycle slot activity for the first N cycles");
    sim->add_option("--csv", so.csv, "append one metrics row to this file");
    sim->add_option("--load-memory", so.load_mem, "preload the memory image (#cabamem v1)");
    sim->add_option("--dump-memory", so.dump_mem, "dump the final memory image");

    CompressOpts co;
    auto* comp = app.add_subcommand("compress",
                                    "compress profile data through the reference codecs");
    comp->add_option("-a,--algorithm", co.algorithm, "none, bdi, fpc, cpack, or best");
    comp->add_option("-p,--profile", co.profile, "data profile to generate");
    comp->add_option("-n,--lines", co.lines, "number of lines");
    comp->add_option("--seed", co.seed, "data seed");
    comp->add_option("--line-size", co.line_size, "line size in bytes");

    SweepOpts wo;
    auto* sweep = app.add_subcommand("sweep", "run a grid of configurations");
    sweep->add_option("-c,--config", wo.config, "key=value configuration file");
    sweep->add_option("-s,--set", wo.sets, "override one key (key=value, repeatable)");
    sweep->add_option("-a,--algorithms", wo.algorithms,
                      "comma list; 'absent' removes the assist machinery entirely");
    sweep->add_option("-p,--profiles", wo.profiles, "comma list of data profiles");
    sweep->add_option("--patterns", wo.patterns, "comma list of access patterns");
    sweep->add_option("--csv", wo.csv, "append rows here instead of stdout");

    DisasmOpts dopt;
    auto* dis = app.add_subcommand("disasm", "list assist subroutines");
    dis->add_option("--line-size", dopt.line_size, "line size in bytes");
    dis->add_option("-n,--name", dopt.name, "only routines whose name contains this");

    try {
        app.parse(argc, argv);
        if (sim->parsed())
            return run_simulate(so);
        if (comp->parsed())
            return run_compress(co);
        if (sweep->parsed())
            return run_sweep(wo);
        if (dis->parsed())
            return run_disasm(dopt);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
