#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "coxmix/dcm_model.hpp"
#include "coxmix/error.hpp"

namespace coxmix {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "coxmix-dcm";

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ModelFormatError("weight matrix has the wrong number of rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ModelFormatError("weight matrix has the wrong number of columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json layer_to_json(const DenseLayer& l) {
    return {{"in", l.in_dim()},
            {"out", l.out_dim()},
            {"weight", matrix_to_json(l.weight)},
            {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

DenseLayer layer_from_json(const json& j) {
    const auto in = j.at("in").get<Eigen::Index>();
    const auto out = j.at("out").get<Eigen::Index>();
    DenseLayer l;
    l.weight = matrix_from_json(j.at("weight"), out, in);
    const auto bias = j.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(bias.size()) != out) throw ModelFormatError("bias length mismatch");
    l.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
    return l;
}

json config_to_json(const DcmConfig& c) {
    return {{"clusters", c.clusters},
            {"hidden_layers", c.hidden_layers},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed},
            {"max_knots", c.max_knots},
            {"baseline_refresh_epochs", c.baseline_refresh_epochs},
            {"use_prior_in_estep", c.use_prior_in_estep},
            {"validation_fraction", c.validation_fraction},
            {"grad_clip_norm", c.grad_clip_norm}};
}

DcmConfig config_from_json(const json& j) {
    DcmConfig c;
    c.clusters = j.at("clusters").get<int>();
    c.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.max_knots = j.at("max_knots").get<int>();
    c.baseline_refresh_epochs = j.at("baseline_refresh_epochs").get<int>();
    c.use_prior_in_estep = j.at("use_prior_in_estep").get<bool>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    return c;
}

json spline_to_json(const SplineSurvivalCurve& s) {
    const auto& c = s.coefficients();
    return {{"knots", c.knots}, {"a", c.a},
            {"b", c.b},         {"c", c.c},
            {"d", c.d},         {"tail_hazard", c.tail_hazard},
            {"fallback", c.fallback}};
}

SplineSurvivalCurve spline_from_json(const json& j) {
    SplineSurvivalCurve::Coefficients c;
    c.knots = j.at("knots").get<std::vector<double>>();
    c.a = j.at("a").get<std::vector<double>>();
    c.b = j.at("b").get<std::vector<double>>();
    c.c = j.at("c").get<std::vector<double>>();
    c.d = j.at("d").get<std::vector<double>>();
    c.tail_hazard = j.at("tail_hazard").get<double>();
    c.fallback = j.at("fallback").get<bool>();
    return SplineSurvivalCurve(std::move(c));
}

double number_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string model_to_string(const DcmModel& model) {
    json j;
    j["format"] = kFormatTag;
    j["format_version"] = kModelFormatVersion;
    j["config"] = config_to_json(model.config);
    j["feature_names"] = model.feature_names;
    if (model.standardization) {
        j["standardization"] = {{"mean", model.standardization->mean},
                                {"scale", model.standardization->scale}};
    } else {
        j["standardization"] = nullptr;
    }
    j["horizon_quantiles"] = model.horizon_quantiles;

    json layers = json::array();
    for (const auto& l : model.params.encoder.layers) layers.push_back(layer_to_json(l));
    j["mlp"] = {{"layer_dims", model.params.encoder.layer_dims},
                {"activation", "relu"},
                {"layers", std::move(layers)}};
    j["heads"] = {{"f", layer_to_json(model.params.heads.f)},
                  {"g", layer_to_json(model.params.heads.g)}};

    json splines = json::array();
    for (const auto& s : model.baselines) splines.push_back(spline_to_json(s));
    j["splines"] = std::move(splines);

    json log = json::array();
    for (const auto& e : model.training_log) {
        json row = {{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"starved_clusters", e.starved_clusters},
                    {"degenerate_rows", e.degenerate_rows}};
        row["validation_loss"] =
            std::isfinite(e.validation_loss) ? json(e.validation_loss) : json(nullptr);
        log.push_back(std::move(row));
    }
    j["training_log"] = std::move(log);
    return j.dump(1);
}

DcmModel model_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelFormatError(fmt::format("model file parse error: {}", e.what()));
    }
    try {
        if (!j.is_object() || j.value("format", std::string{}) != kFormatTag) {
            throw ModelFormatError("not a coxmix model file (missing format tag)");
        }
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelVersionError(fmt::format("unsupported model format version {} (expected {})",
                                                version, kModelFormatVersion));
        }
        DcmModel m;
        m.config = config_from_json(j.at("config"));
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (!j.at("standardization").is_null()) {
            FeatureScaling s;
            s.mean = j["standardization"].at("mean").get<std::vector<double>>();
            s.scale = j["standardization"].at("scale").get<std::vector<double>>();
            m.standardization = std::move(s);
        }
        m.horizon_quantiles = j.at("horizon_quantiles").get<std::vector<double>>();

        const auto& mlp = j.at("mlp");
        m.params.encoder.layer_dims = mlp.at("layer_dims").get<std::vector<int>>();
        for (const auto& l : mlp.at("layers")) m.params.encoder.layers.push_back(layer_from_json(l));
        if (m.params.encoder.layer_dims.size() != m.params.encoder.layers.size() + 1) {
            throw ModelFormatError("encoder layer count does not match layer_dims");
        }
        m.params.heads.f = layer_from_json(j.at("heads").at("f"));
        m.params.heads.g = layer_from_json(j.at("heads").at("g"));
        for (const auto& s : j.at("splines")) m.baselines.push_back(spline_from_json(s));
        if (static_cast<int>(m.baselines.size()) != m.clusters()) {
            throw ModelFormatError("number of baseline splines does not match the cluster count");
        }
        for (const auto& e : j.at("training_log")) {
            EpochLog row;
            row.epoch = e.at("epoch").get<int>();
            row.train_loss = number_or_nan(e.at("train_loss"));
            row.validation_loss = number_or_nan(e.at("validation_loss"));
            row.starved_clusters = e.at("starved_clusters").get<int>();
            row.degenerate_rows = e.at("degenerate_rows").get<int>();
            m.training_log.push_back(row);
        }
        return m;
    } catch (const ModelFormatError&) {
        throw;
    } catch (const Error& e) {
        throw ModelFormatError(fmt::format("invalid model file: {}", e.what()));
    } catch (const json::exception& e) {
        throw ModelFormatError(fmt::format("invalid model file: {}", e.what()));
    }
}

void save_model(const DcmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write model file '{}'", path.string()));
    out << model_to_string(model) << '\n';
    if (!out) throw Error(fmt::format("failed writing model file '{}'", path.string()));
}

DcmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError(fmt::format("cannot open model file '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_string(buf.str());
}

}  // namespace coxmix
