// Python bindings: line compression, subroutine listings, and whole
// simulation runs configured by the same keys the CLI accepts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "caba/codec.hpp"
#include "caba/config.hpp"
#include "caba/isa.hpp"
#include "caba/metrics.hpp"
#include "caba/sim.hpp"
#include "caba/workload.hpp"

namespace py = pybind11;
using namespace caba;

namespace {

Algorithm algorithm_from(const std::string& name) {
    if (name == "bdi")
        return Algorithm::BDI;
    if (name == "fpc")
        return Algorithm::FPC;
    if (name == "cpack")
        return Algorithm::CPACK;
    if (name == "none")
        return Algorithm::NONE;
    throw std::invalid_argument("unknown algorithm '" + name +
                                "' (expected bdi, fpc, cpack, none, or best)");
}

const char* algorithm_str(Algorithm a) {
    switch (a) {
    case Algorithm::BDI: return "bdi";
    case Algorithm::FPC: return "fpc";
    case Algorithm::CPACK: return "cpack";
    default: return "none";
    }
}

std::vector<uint8_t> to_bytes(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

py::bytes from_bytes(const std::vector<uint8_t>& v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

CodecConfig codec_config(size_t data_len, uint32_t burst_size) {
    CodecConfig cfg;
    cfg.line_size = uint32_t(data_len);
    cfg.burst_size = burst_size;
    return cfg;
}

CompressedLine compress_bytes(const py::bytes& data, const std::string& algorithm,
                              uint32_t burst_size) {
    const std::vector<uint8_t> line = to_bytes(data);
    const CodecConfig cfg = codec_config(line.size(), burst_size);
    if (algorithm == "best")
        return best_of_all(line, cfg);
    return compress_with(algorithm_from(algorithm), line, cfg);
}

py::bytes decompress_line(const CompressedLine& c, uint32_t burst_size) {
    const CodecConfig cfg{c.line_size, burst_size};
    return from_bytes(decompress(c, cfg));
}

std::string setting_to_string(const py::handle& value) {
    if (py::isinstance<py::bool_>(value))
        return value.cast<bool>() ? "1" : "0";
    if (py::isinstance<py::int_>(value))
        return std::to_string(value.cast<int64_t>());
    if (py::isinstance<py::float_>(value)) {
        std::ostringstream os;
        os << value.cast<double>();
        return os.str();
    }
    return py::str(value).cast<std::string>();
}

py::dict metrics_dict(const RunMetrics& m) {
    py::dict d;
    d["cycles"] = m.cycles;
    d["parent_instructions"] = m.parent_instructions;
    d["assist_instructions"] = m.assist_instructions;
    d["ipc"] = m.ipc;
    d["bandwidth_utilization"] = m.bandwidth_utilization;
    d["compression_ratio"] = m.compression_ratio;
    d["md_hit_rate"] = m.md_hit_rate;
    d["slots_active"] = m.breakdown.active;
    d["slots_memory"] = m.breakdown.memory;
    d["slots_compute"] = m.breakdown.compute;
    d["slots_data_dependence"] = m.breakdown.data_dependence;
    d["slots_idle"] = m.breakdown.idle;
    d["l1_hits"] = m.l1_hits;
    d["l1_misses"] = m.l1_misses;
    d["l2_hits"] = m.l2_hits;
    d["l2_misses"] = m.l2_misses;
    d["dram_reads"] = m.dram_reads;
    d["dram_writes"] = m.dram_writes;
    d["data_bursts"] = m.data_bursts;
    d["raw_equivalent_bursts"] = m.raw_equivalent_bursts;
    d["md_miss_bursts"] = m.md_miss_bursts;
    d["busy_cycles"] = m.busy_cycles;
    d["md_lookups"] = m.md_lookups;
    d["md_hits"] = m.md_hits;
    d["assists_attempted"] = m.triggers.attempts;
    d["assists_deployed"] = m.triggers.deployed;
    d["assists_completed"] = m.triggers.completed;
    d["assists_killed"] = m.triggers.killed;
    d["assists_rejected_busy"] = m.triggers.rejected_busy;
    d["assists_rejected_full"] = m.triggers.rejected_full;
    d["csv"] = metrics_csv_row(m);
    return d;
}

py::dict run_simulation(const py::kwargs& kwargs) {
    RunConfig rc;
    for (const auto& item : kwargs)
        apply_setting(rc, py::str(item.first).cast<std::string>(),
                      setting_to_string(item.second));
    validate(rc);
    Simulator sim(rc.sim, rc.workload);
    py::dict d = metrics_dict(sim.run());
    d["label"] = rc.label;
    d["algorithm"] = algorithm_name(rc);
    d["profile"] = std::string(to_string(rc.workload.profile));
    d["pattern"] = std::string(to_string(rc.workload.pattern));
    return d;
}

py::list list_subroutines(uint32_t line_size) {
    const SubroutineLibrary lib = build_library(CodecConfig{line_size, 32});
    py::list out;
    for (const Subroutine& s : lib.all()) {
        py::dict d;
        d["name"] = s.name;
        d["algorithm"] = algorithm_str(s.algorithm);
        d["direction"] = s.direction == Direction::Compress ? "compress" : "decompress";
        d["priority"] = s.priority == Priority::High ? "high" : "low";
        d["ops"] = s.ops.size();
        d["registers"] = s.register_requirement;
        out.append(d);
    }
    return out;
}

std::string disassemble_named(const std::string& name, uint32_t line_size) {
    const SubroutineLibrary lib = build_library(CodecConfig{line_size, 32});
    for (const Subroutine& s : lib.all())
        if (s.name == name)
            return disassemble(s);
    throw std::invalid_argument("no subroutine named '" + name + "'");
}

py::bytes profile_line(uint64_t line, const std::string& profile, uint64_t seed,
                       uint32_t line_size) {
    const auto p = profile_from_string(profile);
    if (!p)
        throw std::invalid_argument("unknown data profile '" + profile + "'");
    return from_bytes(line_data(line, *p, seed, line_size));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cycle-level GPU assist-warp compression simulator";
    m.attr("__version__") = "1.0.0";

    py::class_<CompressedLine>(m, "CompressedLine")
        .def_property_readonly("algorithm",
                               [](const CompressedLine& c) {
                                   return std::string(algorithm_str(c.algorithm));
                               })
        .def_property_readonly("encoding",
                               [](const CompressedLine& c) { return c.encoding; })
        .def_property_readonly("encoding_id",
                               [](const CompressedLine& c) {
                                   return c.compressed()
                                              ? encoding_id(c.algorithm, c.encoding)
                                              : uint8_t(0);
                               })
        .def_property_readonly("line_size",
                               [](const CompressedLine& c) { return c.line_size; })
        .def_property_readonly("size",
                               [](const CompressedLine& c) { return c.total_size(); })
        .def_property_readonly("compressed",
                               [](const CompressedLine& c) { return c.compressed(); })
        .def_property_readonly("data",
                               [](const CompressedLine& c) { return from_bytes(c.data); })
        .def("bursts",
             [](const CompressedLine& c, uint32_t burst_size) {
                 return burst_count(c.total_size(), CodecConfig{c.line_size, burst_size});
             },
             py::arg("burst_size") = 32)
        .def("__repr__", [](const CompressedLine& c) {
            std::ostringstream os;
            os << "<CompressedLine " << algorithm_str(c.algorithm) << " "
               << c.total_size() << "/" << c.line_size << " bytes>";
            return os.str();
        });

    m.def("compress", &compress_bytes, py::arg("data"), py::arg("algorithm") = "best",
          py::arg("burst_size") = 32,
          "Compress one cache line (bytes); algorithm is bdi, fpc, cpack, best, or none.");
    m.def("decompress", &decompress_line, py::arg("line"), py::arg("burst_size") = 32,
          "Expand a CompressedLine back to its raw bytes.");
    m.def("run", &run_simulation,
          "Run one simulation; keyword arguments are the configuration keys "
          "(see config_keys()). Returns a dict of run metrics.");
    m.def("config_keys", [] { return config_keys(); },
          "All configuration keys accepted by run().");
    m.def("subroutines", &list_subroutines, py::arg("line_size") = 128,
          "Describe every assist-warp subroutine in the library.");
    m.def("disassemble", &disassemble_named, py::arg("name"), py::arg("line_size") = 128,
          "Disassembly listing of one subroutine by name.");
    m.def("line_data", &profile_line, py::arg("line"), py::arg("profile"),
          py::arg("seed") = 1, py::arg("line_size") = 128,
          "Deterministic per-line synthetic data for a named profile.");
}
