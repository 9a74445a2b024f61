#include "pqii/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pqii/bench.hpp"
#include "pqii/dataset_io.hpp"
#include "pqii/ivf.hpp"
#include "pqii/pipeline.hpp"
#include "pqii/svg_chart.hpp"

namespace pqii::cli {

namespace {

std::size_t default_threads() {
    if (const char* env = std::getenv("PQII_THREADS")) {
        std::size_t value = 0;
        const std::string s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size() || value == 0) {
            throw std::runtime_error("PQII_THREADS must be a positive integer, got '" + s + "'");
        }
        return value;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

std::vector<std::uint64_t> load_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::uint64_t> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::uint64_t id = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
        if (ec != std::errc() || ptr != line.data() + line.size()) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": cannot parse id '" + line + "'");
        }
        ids.push_back(id);
    }
    return ids;
}

std::string strip_svg_ext(std::string path) {
    if (path.size() >= 4) {
        std::string tail = path.substr(path.size() - 4);
        std::transform(tail.begin(), tail.end(), tail.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (tail == ".svg") path.resize(path.size() - 4);
    }
    return path;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// Groups rows into one series per case_label with y = median over rows that
// share the same x. Series follow the canonical mode order.
std::vector<ChartSeries> build_series(const std::vector<BenchRow>& rows,
                                      double (*x_of)(const BenchRow&),
                                      double (*y_of)(const BenchRow&)) {
    static const char* kOrder[] = {"single", "parallel_pq", "parallel_pq_index"};
    std::vector<ChartSeries> series;
    for (const char* label : kOrder) {
        std::map<double, std::vector<double>> by_x;
        for (const auto& row : rows) {
            if (row.case_label == label) by_x[x_of(row)].push_back(y_of(row));
        }
        if (by_x.empty()) continue;
        ChartSeries s;
        s.name = label;
        for (const auto& [x, ys] : by_x) s.points.emplace_back(x, median_of(ys));
        series.push_back(std::move(s));
    }
    return series;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void cmd_report(const std::string& csv_path, const std::string& out_path) {
    std::vector<BenchRow> rows = read_bench_csv(csv_path);
    std::erase_if(rows, [](const BenchRow& r) { return r.phase != "total"; });
    if (rows.empty()) throw std::runtime_error(csv_path + ": no data rows");

    const std::string stem = strip_svg_ext(out_path);

    ChartSpec rmse_m;
    rmse_m.title = "Reconstruction error vs subspace count";
    rmse_m.x_label = "M (subspaces)";
    rmse_m.y_label = "RMSE";
    rmse_m.series = build_series(
        rows, [](const BenchRow& r) { return double(r.m); },
        [](const BenchRow& r) { return r.rmse; });
    write_text_file(stem + "_rmse_vs_m.svg", render_line_chart(rmse_m));

    ChartSpec rmse_ks;
    rmse_ks.title = "Reconstruction error vs code size";
    rmse_ks.x_label = "Ks (codewords per subspace)";
    rmse_ks.y_label = "RMSE";
    rmse_ks.series = build_series(
        rows, [](const BenchRow& r) { return double(r.ks); },
        [](const BenchRow& r) { return r.rmse; });
    write_text_file(stem + "_rmse_vs_ks.svg", render_line_chart(rmse_ks));

    // Run-time chart: x is whichever parameter the sweep varied.
    auto distinct = [&](double (*x_of)(const BenchRow&)) {
        std::vector<double> xs;
        for (const auto& r : rows) xs.push_back(x_of(r));
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        return xs.size();
    };
    double (*ks_of)(const BenchRow&) = [](const BenchRow& r) { return double(r.ks); };
    double (*m_of)(const BenchRow&) = [](const BenchRow& r) { return double(r.m); };
    double (*threads_of)(const BenchRow&) = [](const BenchRow& r) { return double(r.threads); };

    ChartSpec time_chart;
    time_chart.title = "Run time by case";
    time_chart.y_label = "wall seconds";
    double (*x_of)(const BenchRow&) = ks_of;
    time_chart.x_label = "Ks (codewords per subspace)";
    if (distinct(ks_of) < 2 && distinct(m_of) >= 2) {
        x_of = m_of;
        time_chart.x_label = "M (subspaces)";
    } else if (distinct(ks_of) < 2 && distinct(m_of) < 2 && distinct(threads_of) >= 2) {
        x_of = threads_of;
        time_chart.x_label = "threads";
    }
    time_chart.series =
        build_series(rows, x_of, [](const BenchRow& r) { return r.wall_seconds; });
    write_text_file(stem + "_time.svg", render_line_chart(time_chart));

    std::cout << "wrote " << stem << "_rmse_vs_m.svg\n"
              << "wrote " << stem << "_rmse_vs_ks.svg\n"
              << "wrote " << stem << "_time.svg\n";
}

struct CliOptions {
    std::uint64_t seed = 42;
    std::size_t threads = 1;
    bool verbose = false;
};

int run_impl(int argc, const char* const* argv) {
    CLI::App app{"pqii: product quantization, inverted indexing, and a chunked-parallel "
                 "training benchmark"};
    app.require_subcommand(1);

    CliOptions g;
    g.threads = default_threads();
    app.add_option("--seed", g.seed, "RNG seed for all derived randomness")->capture_default_str();
    app.add_option("--threads", g.threads,
                   "worker threads for parallel modes (default: PQII_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose", g.verbose, "print per-run summaries to stderr");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic Gaussian-mixture dataset");
    gen->fallthrough();
    SyntheticSpec spec;
    spec.n_clusters = 16;
    std::string gen_out;
    gen->add_option("--rows", spec.n_rows, "number of rows")->required()->check(CLI::PositiveNumber);
    gen->add_option("--dims", spec.n_dims, "number of dimensions")
        ->required()
        ->check(CLI::PositiveNumber);
    gen->add_option("--clusters", spec.n_clusters, "mixture components")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen->add_option("--spread", spec.spread, "per-component standard deviation")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output path (.fvecs, or native)")->required();
    gen->callback([&] {
        spec.seed = g.seed;
        const VectorMatrix data = gen_synthetic(spec);
        save_matrix(data, gen_out);
        std::cout << "wrote " << gen_out << " (" << data.rows << " x " << data.dims << ")\n";
    });

    // fit
    auto* fit = app.add_subcommand("fit", "train a product quantizer");
    fit->fallthrough();
    std::string fit_data, fit_out;
    std::uint32_t fit_m = 8, fit_ks = 256, fit_iters = kDefaultKMeansIters;
    fit->add_option("--data", fit_data, "input dataset")->required();
    fit->add_option("--m", fit_m, "subspaces")->capture_default_str()->check(CLI::PositiveNumber);
    fit->add_option("--ks", fit_ks, "codewords per subspace")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    fit->add_option("--iters", fit_iters, "k-means iterations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    fit->add_option("--out", fit_out, "output codebook path")->required();
    fit->callback([&] {
        const VectorMatrix data = load_matrix(fit_data);
        const Codebook cb = pq_fit(data, fit_m, fit_ks, fit_iters, g.seed);
        save_codebook(cb, fit_out);
        std::cout << "wrote " << fit_out << " (M=" << cb.m_subspaces << " Ks=" << cb.ks
                  << " Ds=" << cb.sub_dim << ")\n";
    });

    // encode
    auto* encode = app.add_subcommand("encode", "encode a dataset with a codebook");
    encode->fallthrough();
    std::string enc_data, enc_cb, enc_out;
    bool enc_rmse = false;
    encode->add_option("--data", enc_data, "input dataset")->required();
    encode->add_option("--codebook", enc_cb, "codebook path")->required();
    encode->add_option("--out", enc_out, "output code file");
    encode->add_flag("--rmse", enc_rmse, "decode the codes and print the reconstruction RMSE");
    encode->callback([&] {
        const VectorMatrix data = load_matrix(enc_data);
        const Codebook cb = load_codebook(enc_cb);
        const CodeMatrix codes = pq_encode(cb, data);
        if (!enc_out.empty()) {
            save_codes(codes, enc_out);
            std::cout << "wrote " << enc_out << " (" << codes.rows << " x " << codes.m_subspaces
                      << " codes)\n";
        }
        if (enc_rmse) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g", rmse(data, pq_decode(cb, codes)));
            std::cout << "rmse\t" << buf << '\n';
        }
    });

    // build
    auto* build = app.add_subcommand("build", "build an inverted index");
    build->fallthrough();
    std::string build_cb, build_data, build_codes, build_out;
    std::size_t build_nlist = 0;
    std::uint32_t build_iters = kDefaultKMeansIters;
    build->add_option("--codebook", build_cb, "codebook path")->required();
    auto* bd = build->add_option("--data", build_data, "dataset to encode and index");
    auto* bc = build->add_option("--codes", build_codes, "pre-encoded code file to index");
    bd->excludes(bc);
    build->add_option("--nlist", build_nlist, "coarse lists (default: round(sqrt(N)))");
    build->add_option("--iters", build_iters, "k-means iterations for the coarse fit")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    build->add_option("--out", build_out, "output index path")->required();
    build->callback([&] {
        if (build_data.empty() == build_codes.empty()) {
            throw CLI::ValidationError("build", "exactly one of --data or --codes is required");
        }
        const Codebook cb = load_codebook(build_cb);
        const CodeMatrix codes =
            build_codes.empty() ? pq_encode(cb, load_matrix(build_data)) : load_codes(build_codes);
        std::vector<std::uint64_t> ids(codes.rows);
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        const std::size_t nlist = build_nlist == 0 ? default_nlist(codes.rows) : build_nlist;
        const InvertedIndex index = ivf_build(cb, codes, ids, nlist, g.seed, build_iters);
        save_index(index, build_out);
        std::cout << "wrote " << build_out << " (" << index.n_items << " items, nlist="
                  << index.nlist() << ")\n";
    });

    // query
    auto* query = app.add_subcommand("query", "query an index; prints id<TAB>squared-distance");
    query->fallthrough();
    std::string q_index, q_queries, q_subset;
    std::size_t q_k = 10, q_nprobe = 0;
    std::optional<double> q_threshold;
    double q_threshold_raw = 0.0;
    query->add_option("--index", q_index, "index path")->required();
    query->add_option("--queries", q_queries, "query vectors (any dataset format)")->required();
    query->add_option("--k", q_k, "neighbors per query")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    query->add_option("--nprobe", q_nprobe, "posting lists to scan (default: nlist)")
        ->check(CLI::PositiveNumber);
    query->add_option("--subset", q_subset, "file of candidate ids, one per line, sorted");
    auto* thr = query->add_option("--threshold", q_threshold_raw,
                                  "drop hits with squared distance above this value");
    query->callback([&] {
        const InvertedIndex index = load_index(q_index);
        const VectorMatrix queries = load_matrix(q_queries);
        if (thr->count() > 0) q_threshold = q_threshold_raw;
        const std::size_t nprobe = q_nprobe == 0 ? index.nlist() : q_nprobe;
        std::vector<std::uint64_t> subset;
        if (!q_subset.empty()) subset = load_id_file(q_subset);
        for (std::size_t i = 0; i < queries.rows; ++i) {
            const QueryResult result =
                q_subset.empty()
                    ? ivf_query(index, queries.row_span(i), q_k, nprobe, q_threshold)
                    : ivf_query_subset(index, queries.row_span(i), q_k, subset, nprobe,
                                       q_threshold);
            for (const Hit& hit : result.hits) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.9g", hit.sq_dist);
                std::cout << hit.id << '\t' << buf << '\n';
            }
        }
    });

    // bench
    auto* bench = app.add_subcommand("bench", "run the accuracy/run-time case studies");
    bench->fallthrough();
    std::string bench_data, bench_out, bench_sweep;
    std::vector<std::string> bench_modes{"single", "parallel_pq", "parallel_pq_index"};
    BenchOptions bopts;
    bench->add_option("--data", bench_data, "input dataset")->required();
    bench->add_option("--out", bench_out, "CSV to append results to")->required();
    bench->add_option("--modes", bench_modes, "cases to run")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--m-list", bopts.m_list, "subspace counts")->delimiter(',');
    bench->add_option("--ks-list", bopts.ks_list, "code sizes")->delimiter(',');
    bench->add_option("--chunks-list", bopts.chunks_list, "chunk counts for parallel modes")
        ->delimiter(',');
    bench->add_option("--nlist", bopts.nlist, "coarse lists (default: round(sqrt(N)))");
    bench->add_option("--iters", bopts.kmeans_iters, "k-means iterations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bench->add_option("--seeds", bopts.n_seeds, "seeds per point; rmse/wall are medians")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bench->add_option("--sweep", bench_sweep, "preset grid: 'subspace' or 'codesize'")
        ->check(CLI::IsMember({"subspace", "codesize"}));
    bench->callback([&] {
        bopts.modes.clear();
        for (const auto& name : bench_modes) {
            const auto mode = parse_mode(name);
            if (!mode) throw CLI::ValidationError("--modes", "unknown mode '" + name + "'");
            bopts.modes.push_back(*mode);
        }
        if (bench_sweep == "subspace") bopts.m_list = {2, 4, 8, 16};
        if (bench_sweep == "codesize") bopts.ks_list = {16, 64, 256};
        bopts.threads = g.threads;
        bopts.seed = g.seed;
        bopts.verbose = g.verbose;
        const VectorMatrix data = load_matrix(bench_data);
        const std::vector<BenchRow> rows = run_bench(data, bopts);
        append_bench_csv(bench_out, rows);
        std::cout << "appended " << rows.size() << " rows to " << bench_out << '\n';
    });

    // report
    auto* report = app.add_subcommand("report", "render SVG charts from a bench CSV");
    report->fallthrough();
    std::string rep_csv, rep_out;
    report->add_option("--csv", rep_csv, "bench CSV path")->required();
    report->add_option("--out", rep_out, "output path stem for the SVG files")->required();
    report->callback([&] { cmd_report(rep_csv, rep_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // help text
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    try {
        return run_impl(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& arg : args) argv.push_back(arg.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pqii::cli
