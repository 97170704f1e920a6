// Command-line front end: simulate, train, estimate, uq, bench, sweep, pipeline.
#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "levynbe/levynbe.hpp"

namespace fs = std::filesystem;
using namespace levynbe;

namespace {

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const NonMonotoneTimestamps*>(&e)) return "NonMonotoneTimestamps";
    if (dynamic_cast<const NonPositivePrice*>(&e)) return "NonPositivePrice";
    if (dynamic_cast<const EmptyWindow*>(&e)) return "EmptyWindow";
    if (dynamic_cast<const ZeroScale*>(&e)) return "ZeroScale";
    if (dynamic_cast<const FormatVersionMismatch*>(&e)) return "FormatVersionMismatch";
    if (dynamic_cast<const CorruptArtifact*>(&e)) return "CorruptArtifact";
    if (dynamic_cast<const InputLengthMismatch*>(&e)) return "InputLengthMismatch";
    if (dynamic_cast<const ModelMismatch*>(&e)) return "ModelMismatch";
    if (dynamic_cast<const OutOfBox*>(&e)) return "OutOfBox";
    if (dynamic_cast<const EmptyInput*>(&e)) return "EmptyInput";
    if (dynamic_cast<const GammaShapeUnderflow*>(&e)) return "GammaShapeUnderflow";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "InternalError";
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

PriorBox resolve_prior(const ModelSpec& model, const std::string& prior_path) {
    if (prior_path.empty()) return PriorBox::standard(model);
    return prior_from_json(model, read_json_file(prior_path));
}

void write_increments(const IncrementSeries& data, const fs::path& path) {
    if (path.extension() == ".bin") write_increments_binary(data, path);
    else write_increments_csv(data, path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto f : detail::split(s, ',')) out.emplace_back(f);
    return out;
}

// Loads the lower and upper quantile estimators and checks their lin-lin
// levels against `level`.
QuantileBundle load_bundle(const DeepSetsEstimator& point, const std::string& paths, double level) {
    const auto parts = split_list(paths);
    if (parts.size() != 2) throw InvalidArgument("--bundle expects '<lower artifact>,<upper artifact>'");
    auto lo = load_with_info(parts[0]);
    auto hi = load_with_info(parts[1]);
    const auto [a_lo, a_hi] = quantile_levels(level);
    auto check = [](const LoadedEstimator& e, double alpha, const std::string& path) {
        if (e.info.loss.empty()) return;
        const auto loss = LossKind::parse(e.info.loss);
        if (loss.kind != LossKind::Kind::LinLin || std::abs(loss.alpha - alpha) > 1e-9)
            throw InvalidArgument("artifact '" + path + "' was trained with " + e.info.loss + ", expected linlin:" +
                                  format_double(alpha));
    };
    check(lo, a_lo, parts[0]);
    check(hi, a_hi, parts[1]);
    QuantileBundle b{std::move(lo.estimator), std::move(hi.estimator), point, level};
    b.validate();
    return b;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural Bayes and classical estimation for Levy-process increments"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate increments of a Levy model");
    std::string sim_model, sim_params, sim_out;
    std::size_t sim_n = 0;
    std::uint64_t sim_seed = 0;
    sim->add_option("--model", sim_model, "cp, merton, vg or dvg:<L>")->required();
    sim->add_option("--params", sim_params, "Comma-separated parameter values")->required();
    sim->add_option("--n", sim_n, "Number of observations (n - 1 increments)")->required()->check(CLI::Range(2ULL, 1ULL << 40));
    sim->add_option("--seed", sim_seed, "Random seed");
    sim->add_option("--out", sim_out, "Output file (.bin for the binary container, CSV otherwise)")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train a neural Bayes estimator");
    std::string tr_model, tr_prior, tr_loss = "msle", tr_agg = "mean", tr_act = "lrelu", tr_out, tr_report;
    TrainConfig tc;
    std::uint64_t tr_seed = 0;
    tr->add_option("--model", tr_model, "cp, merton, vg or dvg:<L>")->required();
    tr->add_option("--prior", tr_prior, "Prior box JSON {\"lower\": [...], \"upper\": [...]}; default: standard box");
    tr->add_option("--k", tc.K, "Parameter draws from the prior")->capture_default_str();
    tr->add_option("--j", tc.J, "Datasets per parameter draw")->capture_default_str();
    tr->add_option("--nt", tc.n_t, "Increments per dataset")->capture_default_str();
    tr->add_option("--loss", tr_loss, "msle, mae, mse or linlin:<alpha>")->capture_default_str();
    tr->add_option("--agg", tr_agg, "mean, sum, max, min or product")->capture_default_str();
    tr->add_option("--act", tr_act, "lrelu, relu or tanh")->capture_default_str();
    tr->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
    tr->add_option("--batch", tc.batch_size, "Datasets per minibatch")->capture_default_str();
    tr->add_option("--lr", tc.learning_rate, "Adam learning rate")->capture_default_str();
    tr->add_option("--seed", tr_seed, "Random seed");
    tr->add_option("--out", tr_out, "Artifact path")->required();
    tr->add_option("--report", tr_report, "Write the training report here (JSON; a .csv twin is written alongside)");

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate parameters from an increment file");
    std::string es_artifact, es_data, es_method = "nbe", es_model, es_prior;
    std::size_t es_grid_count = 0;
    int es_restarts = default_lsq_restarts;
    std::uint64_t es_seed = 0;
    est->add_option("--artifact", es_artifact, "Trained estimator (method nbe)");
    est->add_option("--data", es_data, "Increment file (CSV or binary)")->required();
    est->add_option("--method", es_method, "nbe, lsq or mele")->capture_default_str();
    est->add_option("--model", es_model, "Model (methods lsq and mele)");
    est->add_option("--prior", es_prior, "Prior box JSON (methods lsq and mele); default: standard box");
    est->add_option("--grid-count", es_grid_count, "Frequencies in the default grid (lsq 32, mele 5)");
    est->add_option("--restarts", es_restarts, "Nelder-Mead restarts (lsq)")->capture_default_str();
    est->add_option("--seed", es_seed, "Random seed");

    // uq
    auto* uq = app.add_subcommand("uq", "Interval estimates from an increment file");
    std::string uq_artifact, uq_data, uq_method = "bootstrap:400", uq_bundle, uq_out;
    double uq_level = 0.9;
    std::uint64_t uq_seed = 0;
    uq->add_option("--artifact", uq_artifact, "Point estimator artifact")->required();
    uq->add_option("--data", uq_data, "Increment file (CSV or binary)")->required();
    uq->add_option("--method", uq_method, "bootstrap:<B> or quantile")->capture_default_str();
    uq->add_option("--bundle", uq_bundle, "Quantile estimators '<lower>,<upper>' (method quantile)");
    uq->add_option("--level", uq_level, "Interval level in (0, 1)")->capture_default_str();
    uq->add_option("--seed", uq_seed, "Random seed");
    uq->add_option("--out", uq_out, "Also write the long-format interval CSV here");

    // bench
    auto* be = app.add_subcommand("bench", "Benchmark one method on prior-drawn test sets");
    std::string be_model, be_method = "nbe", be_scale, be_prior, be_out;
    std::uint64_t be_seed = 0;
    be->add_option("--model", be_model, "cp, merton, vg or dvg:<L>")->required();
    be->add_option("--method", be_method, "nbe, lsq or mele")->capture_default_str();
    be->add_option("--scale", be_scale, "Scale config JSON (n_test, n_t, train{K, J, epochs, ...}, grid_count, ...)");
    be->add_option("--prior", be_prior, "Prior box JSON; default: standard box");
    be->add_option("--seed", be_seed, "Random seed");
    be->add_option("--out", be_out, "Output directory")->required();

    // sweep
    auto* sw = app.add_subcommand("sweep", "NBE benchmarks along one configuration axis");
    std::string sw_model, sw_axis, sw_values, sw_scale, sw_prior, sw_out;
    std::uint64_t sw_seed = 0;
    sw->add_option("--model", sw_model, "cp, merton, vg or dvg:<L>")->required();
    sw->add_option("--axis", sw_axis, "nt, k, agg or act")->required();
    sw->add_option("--values", sw_values, "Comma-separated axis values (at least 2)")->required();
    sw->add_option("--scale", sw_scale, "Scale config JSON");
    sw->add_option("--prior", sw_prior, "Prior box JSON; default: standard box");
    sw->add_option("--seed", sw_seed, "Random seed");
    sw->add_option("--out", sw_out, "Output directory")->required();

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Windowed estimation over a price file");
    std::string pl_prices, pl_artifact, pl_uq = "bootstrap:400", pl_bundle, pl_out, pl_rescale = "var",
                                        pl_align = "auto";
    PriceFormat pl_format;
    std::string pl_delim = ",";
    PipelineOptions popt;
    std::uint64_t pl_seed = 0;
    pl->add_option("--prices", pl_prices, "Price CSV")->required();
    pl->add_option("--step", popt.step, "Grid step in seconds")->capture_default_str()->check(CLI::PositiveNumber);
    pl->add_option("--nt", popt.n_t, "Slots per window")->capture_default_str()->check(CLI::PositiveNumber);
    pl->add_option("--artifact", pl_artifact, "Point estimator artifact")->required();
    pl->add_option("--uq", pl_uq, "bootstrap:<B>, quantile or none")->capture_default_str();
    pl->add_option("--bundle", pl_bundle, "Quantile estimators '<lower>,<upper>' (uq quantile)");
    pl->add_option("--level", popt.level, "Interval level in (0, 1)")->capture_default_str();
    pl->add_option("--rescale", pl_rescale, "var (multiply variances by scale^2) or sd (by scale)")->capture_default_str();
    pl->add_option("--align", pl_align, "auto, calendar or index")->capture_default_str();
    pl->add_option("--timestamp-col", pl_format.timestamp_column, "Timestamp column name")->capture_default_str();
    pl->add_option("--price-col", pl_format.price_column, "Price column name")->capture_default_str();
    pl->add_option("--delimiter", pl_delim, "Field delimiter")->capture_default_str();
    pl->add_option("--seed", pl_seed, "Random seed");
    pl->add_option("--out", pl_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) {
            const auto model = ModelSpec::parse(sim_model);
            const auto params = parse_param_list(model, sim_params);
            const auto data = simulate_increments(params, sim_n, SeedSpec{sim_seed, 0});
            write_increments(data, sim_out);
            print_json({{"model", model.to_string()}, {"params", params_json(params)},
                        {"increments", data.size()}, {"out", sim_out}});
        } else if (*tr) {
            const auto model = ModelSpec::parse(tr_model);
            const auto prior = resolve_prior(model, tr_prior);
            tc.loss = LossKind::parse(tr_loss);
            tc.arch.aggregation = parse_aggregation(tr_agg);
            tc.arch.activation = parse_activation(tr_act);
            tc.seed = SeedSpec{tr_seed, 0};
            const auto result = train(model, prior, tc);
            save(result.estimator, tr_out, ArtifactInfo{tc.loss.to_string()});
            Json j = {{"artifact", tr_out}, {"config", train_config_json(tc)}, {"report", train_report_json(result.report)}};
            if (!tr_report.empty()) {
                write_text_file(tr_report, j.dump(2) + "\n");
                fs::path csv = tr_report;
                csv.replace_extension(".csv");
                write_text_file(csv, train_report_csv(result.report));
            }
            print_json(j);
        } else if (*est) {
            const auto data = read_increments(es_data);
            if (es_method == "nbe") {
                if (es_artifact.empty()) throw InvalidArgument("--artifact is required for method nbe");
                const auto e = load(es_artifact);
                const auto t0 = std::chrono::steady_clock::now();
                const auto theta = e.forward(data);
                const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                print_json({{"method", "nbe"}, {"model", theta.model().to_string()}, {"estimate", params_json(theta)},
                            {"wall_time_s", dt}});
            } else if (es_method == "lsq" || es_method == "mele") {
                if (es_model.empty()) throw InvalidArgument("--model is required for methods lsq and mele");
                const auto model = ModelSpec::parse(es_model);
                const auto prior = resolve_prior(model, es_prior);
                const SeedSpec seed{es_seed, 0};
                if (es_method == "lsq") {
                    const auto grid = default_grid(data, es_grid_count ? es_grid_count : default_lsq_grid_count);
                    print_json(fit_json(lsq_fit(data, model, prior, grid, es_restarts, seed), "lsq"));
                } else {
                    const auto grid = default_grid(data, es_grid_count ? es_grid_count : default_mele_grid_count);
                    print_json(fit_json(mele_fit(data, model, prior, grid, seed), "mele"));
                }
            } else {
                throw InvalidArgument("unknown method '" + es_method + "' (expected nbe, lsq, mele)");
            }
        } else if (*uq) {
            const auto point = load(uq_artifact);
            const auto data = read_increments(uq_data);
            const auto spec = UqSpec::parse(uq_method);
            IntervalSet s;
            if (spec.kind == UqSpec::Kind::Bootstrap) {
                s = bootstrap_interval(point, data, spec.replicates, uq_level, SeedSpec{uq_seed, 0});
            } else if (spec.kind == UqSpec::Kind::Quantile) {
                if (uq_bundle.empty()) throw InvalidArgument("--bundle is required for method quantile");
                s = credible_interval(load_bundle(point, uq_bundle, uq_level), data);
            } else {
                throw InvalidArgument("uq needs method bootstrap:<B> or quantile");
            }
            if (!uq_out.empty()) write_text_file(uq_out, interval_csv_header() + interval_csv_rows("0", s));
            print_json(interval_json(s));
        } else if (*be) {
            const auto model = ModelSpec::parse(be_model);
            const auto prior = resolve_prior(model, be_prior);
            const auto cfg = be_scale.empty() ? ScaleConfig{} : scale_config_from_json(read_json_file(be_scale));
            const auto rep = run_benchmark(model, prior, parse_bench_method(be_method), cfg, SeedSpec{be_seed, 0});
            fs::create_directories(be_out);
            write_text_file(fs::path(be_out) / "report.json", benchmark_json(rep).dump(2) + "\n");
            write_text_file(fs::path(be_out) / "table.md", benchmark_markdown({rep}));
            write_text_file(fs::path(be_out) / "table.csv", benchmark_csv({rep}));
            std::cout << benchmark_markdown({rep});
        } else if (*sw) {
            const auto model = ModelSpec::parse(sw_model);
            const auto prior = resolve_prior(model, sw_prior);
            const auto cfg = sw_scale.empty() ? ScaleConfig{} : scale_config_from_json(read_json_file(sw_scale));
            const auto values = split_list(sw_values);
            const auto axis = parse_sweep_axis(sw_axis);
            const auto reps = sweep(model, prior, axis, values, cfg, SeedSpec{sw_seed, 0});
            fs::create_directories(sw_out);
            Json all = Json::array();
            for (std::size_t i = 0; i < reps.size(); ++i) {
                Json j = benchmark_json(reps[i]);
                j["axis"] = to_string(axis);
                j["value"] = values[i];
                all.push_back(j);
            }
            write_text_file(fs::path(sw_out) / "sweep.json", all.dump(2) + "\n");
            write_text_file(fs::path(sw_out) / "table.csv", benchmark_csv(reps));
            for (std::size_t i = 0; i < reps.size(); ++i)
                std::cout << "## " << to_string(axis) << " = " << values[i] << "\n" << benchmark_markdown({reps[i]});
        } else if (*pl) {
            if (pl_delim.size() != 1) throw InvalidArgument("--delimiter must be a single character");
            pl_format.delimiter = pl_delim[0];
            popt.uq = UqSpec::parse(pl_uq);
            popt.rescale = parse_rescale(pl_rescale);
            popt.align = parse_alignment(pl_align);
            popt.seed = SeedSpec{pl_seed, 0};
            const auto t0 = std::chrono::steady_clock::now();
            const auto e = load(pl_artifact);
            std::optional<QuantileBundle> bundle;
            if (popt.uq.kind == UqSpec::Kind::Quantile) {
                if (pl_bundle.empty()) throw InvalidArgument("--bundle is required for uq quantile");
                bundle = load_bundle(e, pl_bundle, popt.level);
            }
            const auto prices = load_prices(pl_prices, pl_format);
            const auto result = run_pipeline(e, prices, popt, bundle ? &*bundle : nullptr);
            write_pipeline_outputs(result, popt, e.model().to_string(), pl_out);
            const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::size_t flagged = 0;
            for (const auto& w : result.windows) flagged += w.flagged ? 1 : 0;
            print_json({{"windows", result.windows.size()},
                        {"flagged_windows", flagged},
                        {"estimate_time_s", result.estimate_time},
                        {"uq_time_s", result.uq_time},
                        {"total_time_s", total},
                        {"out", pl_out}});
        }
    } catch (const std::exception& e) {
        const Json err = {{"error", error_kind(e)}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}
