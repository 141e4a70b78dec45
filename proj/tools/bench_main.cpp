#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "proofgate/bench.hpp"
#include "proofgate/infotree.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTransport = 2;
constexpr int kExitData = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw proofgate::DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace proofgate;

    CLI::App app{"Benchmark and inspection tools for the proof-checking server"};
    app.require_subcommand(1);

    BenchOptions options;
    std::string corpus_path;
    std::string mode = "cached";
    std::string out_path;
    double timeout = 0;
    auto* run = app.add_subcommand("run", "Send a corpus to a server and report timings");
    run->add_option("--server", options.server, "Server base URL")->capture_default_str();
    run->add_option("--corpus", corpus_path, "Corpus file ({uuid, code} per line)")->required();
    run->add_option("--batch-size", options.batch_size, "Snippets per request")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--in-flight", options.in_flight, "Concurrent requests")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--mode", mode, "cached or non-cached")
        ->capture_default_str()
        ->check(CLI::IsMember({"cached", "non-cached", "non_cached"}));
    run->add_option("--timeout", timeout, "Per-snippet timeout in seconds (server default when omitted)")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", out_path, "Write the report as JSON to this file");

    std::string tree_path;
    std::string source_path;
    bool full_coordinates = false;
    bool as_json = false;
    bool keep_calc = false;
    auto* extract = app.add_subcommand("extract", "Print the tactic intervals of a stored infotree");
    extract->add_option("--tree", tree_path, "Infotree JSON file")->required();
    extract->add_option("--source", source_path, "Lean source the tree was produced from")->required();
    extract->add_flag("--full-coordinates", full_coordinates,
                      "Tree positions count from the top of the source, not from the proof body");
    extract->add_flag("--json", as_json, "Emit steps as JSON instead of the interval listing");
    extract->add_flag("--keep-calc", keep_calc, "Do not split calc blocks into their steps");

    std::string in_path;
    std::string prepared_path;
    auto* prepare = app.add_subcommand("prepare-corpus", "Turn a dataset export into a corpus file");
    prepare->add_option("--in", in_path, "Dataset export (JSON lines or JSON array)")->required();
    prepare->add_option("--out", prepared_path, "Corpus file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*run) {
            options.mode = bench_mode_from_string(mode);
            if (timeout > 0) options.timeout = Seconds{timeout};
            const auto corpus = load_corpus(corpus_path);
            const auto report = run_benchmark(options, corpus);
            std::cout << report.table();
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                if (!out) throw DataError("cannot write '" + out_path + "'");
                out << report.to_json().dump(2) << "\n";
            }
        } else if (*extract) {
            const auto doc = json::parse(read_file(tree_path), nullptr, false);
            if (doc.is_discarded()) throw MalformedTree("tree file is not valid JSON");
            const auto source = read_file(source_path);
            const auto split = split_snippet(source);
            ExtractOptions extract_options;
            extract_options.split_calc = !keep_calc;
            const auto steps = full_coordinates ? extract_data(doc, split.body, split.header, extract_options)
                                                : extract_data(doc, split.body, {}, extract_options);
            if (as_json) {
                json out = json::array();
                for (const auto& step : steps) out.push_back(to_json(step));
                std::cout << out.dump(2) << "\n";
            } else if (steps.empty()) {
                std::cout << "0 intervals\n";
            } else {
                std::cout << format_intervals(steps);
            }
        } else if (*prepare) {
            std::ifstream in(in_path);
            if (!in) throw DataError("cannot open '" + in_path + "'");
            std::ofstream out(prepared_path);
            if (!out) throw DataError("cannot write '" + prepared_path + "'");
            const auto stats = prepare_corpus(in, out);
            std::cerr << "read " << stats.read << ", kept " << stats.kept << ", duplicates " << stats.duplicates
                      << ", incomplete " << stats.incomplete << ", with sorry " << stats.with_sorry << "\n";
        }
    } catch (const TransportError& e) {
        std::cerr << "bench: " << e.what() << "\n";
        return kExitTransport;
    } catch (const MalformedTree& e) {
        std::cerr << "bench: MalformedTree: " << e.what() << "\n";
        return kExitData;
    } catch (const SpanOutOfBounds& e) {
        std::cerr << "bench: SpanOutOfBounds: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "bench: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "bench: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
