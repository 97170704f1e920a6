#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levynbe/bench.hpp"
#include "levynbe/classical.hpp"
#include "levynbe/data.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/train.hpp"
#include "levynbe/uq.hpp"

namespace levynbe {

using Json = nlohmann::json;

inline Json params_json(const ParamVector& p) {
    Json j = Json::object();
    const auto names = p.model().param_names();
    for (std::size_t i = 0; i < p.size(); ++i) j[names[i]] = p[i];
    return j;
}

inline Json prior_json(const PriorBox& box) {
    return {{"model", box.model().to_string()}, {"lower", box.lower()}, {"upper", box.upper()}};
}

// {"lower": [...], "upper": [...]} with an optional "model" that must agree.
inline PriorBox prior_from_json(const ModelSpec& model, const Json& j) {
    try {
        if (j.contains("model") && !(ModelSpec::parse(j.at("model").get<std::string>()) == model))
            throw ModelMismatch("prior file is for model '" + j.at("model").get<std::string>() + "', not '" +
                                model.to_string() + "'");
        return PriorBox(model, j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("prior JSON needs numeric 'lower' and 'upper' arrays: ") + e.what());
    }
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw InvalidArgument("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline Json fit_json(const FitResult& r, const std::string& method) {
    return {{"method", method},
            {"model", r.estimate.model().to_string()},
            {"estimate", params_json(r.estimate)},
            {"objective", r.objective},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"wall_time_s", r.wall_time}};
}

inline Json train_report_json(const TrainReport& r) {
    return {{"epoch_train_risk", r.epoch_train_risk},
            {"epoch_val_risk", r.epoch_val_risk},
            {"initial_val_risk", r.initial_val_risk},
            {"best_epoch", r.best_epoch},
            {"best_val_risk", r.best_val_risk},
            {"wall_time_s", r.wall_time},
            {"simulation_time_s", r.simulation_time},
            {"underflow_retries", r.underflow_retries},
            {"redraws", r.redraws}};
}

inline Json train_config_json(const TrainConfig& c) {
    return {{"K", c.K},
            {"J", c.J},
            {"n_t", c.n_t},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"loss", c.loss.to_string()},
            {"aggregation", to_string(c.arch.aggregation)},
            {"activation", to_string(c.arch.activation)},
            {"embed_dim", c.arch.embed_dim},
            {"hidden_width", c.arch.hidden_width},
            {"hidden_layers", c.arch.hidden_layers},
            {"val_fraction", c.val_fraction},
            {"patience", c.patience},
            {"seed", c.seed.root_seed},
            {"stream", c.seed.stream_id}};
}

// Epoch 0 is the initialization (validation risk only).
inline std::string train_report_csv(const TrainReport& r) {
    std::string out = "epoch,train_risk,val_risk\n";
    out += "0,," + format_double(r.initial_val_risk) + "\n";
    for (std::size_t e = 0; e < r.epoch_val_risk.size(); ++e)
        out += std::to_string(e + 1) + "," + format_double(r.epoch_train_risk[e]) + "," +
               format_double(r.epoch_val_risk[e]) + "\n";
    return out;
}

inline Json interval_json(const IntervalSet& s) {
    return {{"model", s.point.model().to_string()},
            {"method", to_string(s.method)},
            {"level", s.level},
            {"point", params_json(s.point)},
            {"lower", params_json(s.lower)},
            {"upper", params_json(s.upper)},
            {"crossings", s.crossings}};
}

inline std::string interval_csv_header() { return "window_id,param,point,lower,upper,method,level\n"; }

inline std::string interval_csv_rows(const std::string& window_id, const IntervalSet& s) {
    std::string out;
    const auto names = s.point.model().param_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        out += window_id + "," + names[i] + "," + format_double(s.point[i]) + "," + format_double(s.lower[i]) + "," +
               format_double(s.upper[i]) + "," + to_string(s.method) + "," + format_double(s.level) + "\n";
    return out;
}

inline Json metric_row_json(const MetricRow& r) {
    Json j = {{"param", r.param_name}, {"rmse", r.rmse}, {"bias", r.bias}, {"sd", r.sd}, {"nrmse", r.nrmse}};
    j["mape"] = r.mape ? Json(*r.mape) : Json(nullptr);
    return j;
}

inline Json scale_config_json(const ScaleConfig& c) {
    return {{"n_test", c.n_test},
            {"n_t", c.n_t},
            {"train", train_config_json(c.train)},
            {"grid_count", c.grid_count},
            {"restarts", c.restarts},
            {"mele_grid_count", c.mele_grid_count},
            {"mele_lsq_restarts", c.mele_lsq_restarts},
            {"mele_budget", c.mele_budget}};
}

// Reads the fields present in `j` on top of `base`.
inline ScaleConfig scale_config_from_json(const Json& j, ScaleConfig base = {}) {
    try {
        auto get = [&](const Json& obj, const char* key, auto& field) {
            if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
        };
        get(j, "n_test", base.n_test);
        get(j, "n_t", base.n_t);
        get(j, "grid_count", base.grid_count);
        get(j, "restarts", base.restarts);
        get(j, "mele_grid_count", base.mele_grid_count);
        get(j, "mele_lsq_restarts", base.mele_lsq_restarts);
        get(j, "mele_budget", base.mele_budget);
        const Json t = j.contains("train") ? j.at("train") : Json::object();
        auto& tc = base.train;
        get(t, "K", tc.K);
        get(t, "J", tc.J);
        get(t, "epochs", tc.epochs);
        get(t, "batch_size", tc.batch_size);
        get(t, "learning_rate", tc.learning_rate);
        get(t, "val_fraction", tc.val_fraction);
        get(t, "patience", tc.patience);
        get(t, "embed_dim", tc.arch.embed_dim);
        get(t, "hidden_width", tc.arch.hidden_width);
        get(t, "hidden_layers", tc.arch.hidden_layers);
        if (t.contains("loss")) tc.loss = LossKind::parse(t.at("loss").get<std::string>());
        if (t.contains("aggregation")) tc.arch.aggregation = parse_aggregation(t.at("aggregation").get<std::string>());
        if (t.contains("activation")) tc.arch.activation = parse_activation(t.at("activation").get<std::string>());
        tc.n_t = base.n_t;
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("scale config: ") + e.what());
    }
    return base;
}

inline Json benchmark_json(const BenchmarkReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) rows.push_back(metric_row_json(row));
    Json j = {{"model", r.model.to_string()},
              {"method", to_string(r.method)},
              {"rows", rows},
              {"est_time_s", r.est_time},
              {"est_time_extrapolated", r.est_time_extrapolated},
              {"n_evaluated", r.n_evaluated},
              {"prior", prior_json(r.prior)},
              {"seed", r.seed_root},
              {"stream", r.seed_stream},
              {"config", scale_config_json(r.config)}};
    j["train_time_s"] = r.train_time ? Json(*r.train_time) : Json(nullptr);
    return j;
}

namespace detail {
inline std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2g", v);
    return buf;
}
}  // namespace detail

// Method x parameter table with cells "RMSE (bias) [SD]".
inline std::string benchmark_markdown(const std::vector<BenchmarkReport>& reports) {
    if (reports.empty()) return "";
    std::string out = "| Method | Training [s] | Est Time [s] |";
    std::string rule = "|---|---|---|";
    for (const auto& row : reports.front().rows) {
        out += " " + row.param_name + " |";
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (const auto& r : reports) {
        out += "| " + to_string(r.method) + " | " + (r.train_time ? detail::short_num(*r.train_time) : "-") + " | " +
               detail::short_num(r.est_time) + (r.est_time_extrapolated ? "*" : "") + " |";
        for (const auto& row : r.rows)
            out += " " + detail::short_num(row.rmse) + " (" + detail::short_num(row.bias) + ") [" +
                   detail::short_num(row.sd) + "] |";
        out += "\n";
    }
    return out;
}

inline std::string benchmark_csv(const std::vector<BenchmarkReport>& reports) {
    std::string out = "model,method,param,rmse,bias,sd,nrmse,mape,est_time_s,train_time_s\n";
    for (const auto& r : reports)
        for (const auto& row : r.rows)
            out += r.model.to_string() + "," + to_string(r.method) + "," + row.param_name + "," +
                   format_double(row.rmse) + "," + format_double(row.bias) + "," + format_double(row.sd) + "," +
                   format_double(row.nrmse) + "," + (row.mape ? format_double(*row.mape) : "") + "," +
                   format_double(r.est_time) + "," + (r.train_time ? format_double(*r.train_time) : "") + "\n";
    return out;
}

}  // namespace levynbe
