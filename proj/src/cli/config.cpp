#include "boal/config.hpp"

#include "boal/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace boal {

using nlohmann::json;

namespace {

// Reads j[key] as T, reporting the dotted field path on failure.
template <class T>
T field(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key) || j.at(key).is_null())
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + key + ": wrong type");
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object())
        throw ConfigError((where.empty() ? std::string("config") : where.substr(0, where.size() - 1)) +
                          ": expected an object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError(where + key + ": unknown field");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base.empty())
        return path.lexically_normal();
    return (base / path).lexically_normal();
}

StreamSpec streams_from(const json& j) {
    reject_unknown(j, {"horizon", "dimension", "process", "phi", "amplitude", "noise"},
                   "problem.synthetic.streams.");
    StreamSpec s;
    const std::string w = "problem.synthetic.streams.";
    s.horizon = field(j, "horizon", w, s.horizon);
    s.dimension = field(j, "dimension", w, s.dimension);
    try {
        s.process = parse_process(field(j, "process", w, process_name(s.process)));
    } catch (const Error& ex) {
        throw ConfigError(w + "process: " + ex.what());
    }
    s.phi = field(j, "phi", w, s.phi);
    s.amplitude = field(j, "amplitude", w, s.amplitude);
    s.noise = field(j, "noise", w, s.noise);
    return s;
}

SyntheticFamily family_from(const json& j) {
    reject_unknown(j, {"theta", "perturbation", "n_models", "kappa", "target_index"},
                   "problem.synthetic.family.");
    SyntheticFamily f;
    const std::string w = "problem.synthetic.family.";
    f.theta = field(j, "theta", w, f.theta);
    f.perturbation = field(j, "perturbation", w, f.perturbation);
    f.n_models = field(j, "n_models", w, f.n_models);
    f.kappa = field(j, "kappa", w, f.kappa);
    f.target_index = field(j, "target_index", w, f.target_index);
    return f;
}

std::vector<std::filesystem::path> expert_paths(const json& j, const std::filesystem::path& base) {
    const std::string w = "problem.csv.experts";
    std::vector<std::filesystem::path> out;
    if (j.is_string()) {
        // A directory: every *.csv inside, in name order.
        const auto dir = resolve(base, j.get<std::string>());
        if (!std::filesystem::is_directory(dir))
            throw ConfigError(w + ": '" + dir.string() + "' is not a directory");
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                out.push_back(entry.path().lexically_normal());
        std::sort(out.begin(), out.end());
        if (out.empty())
            throw ConfigError(w + ": no .csv files in '" + dir.string() + "'");
        return out;
    }
    if (!j.is_array())
        throw ConfigError(w + ": expected a directory or a list of files");
    for (const auto& item : j) {
        if (!item.is_string())
            throw ConfigError(w + ": entries must be paths");
        out.push_back(resolve(base, item.get<std::string>()));
    }
    return out;
}

void require_file(const std::filesystem::path& p, const std::string& name) {
    if (!std::filesystem::is_regular_file(p))
        throw ConfigError(name + ": file '" + p.string() + "' does not exist");
}

} // namespace

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j,
                   {"problem", "strategies", "budgets", "eta", "loss", "ets_grid_size", "runs_per_setting",
                    "alpha", "rmse_mode", "prior_cap", "seeds", "output_dir", "serve"},
                   "");
    RunConfig c;

    if (!j.contains("problem"))
        throw ConfigError("problem: missing (expects 'synthetic' or 'csv')");
    const json& problem = j.at("problem");
    reject_unknown(problem, {"synthetic", "csv"}, "problem.");
    if (problem.contains("synthetic") == problem.contains("csv"))
        throw ConfigError("problem: exactly one of 'synthetic' or 'csv' is required");
    if (problem.contains("synthetic")) {
        const json& s = problem.at("synthetic");
        reject_unknown(s, {"streams", "family", "prior_episodes", "eval_episodes"}, "problem.synthetic.");
        SyntheticSource src;
        if (s.contains("streams"))
            src.streams = streams_from(s.at("streams"));
        if (s.contains("family"))
            src.family = family_from(s.at("family"));
        src.prior_episodes = field(s, "prior_episodes", "problem.synthetic.", src.prior_episodes);
        src.eval_episodes = field(s, "eval_episodes", "problem.synthetic.", src.eval_episodes);
        c.synthetic = src;
    } else {
        const json& s = problem.at("csv");
        reject_unknown(s, {"prior", "eval", "experts"}, "problem.csv.");
        CsvSource src;
        for (const char* key : {"prior", "eval", "experts"})
            if (!s.contains(key))
                throw ConfigError(std::string("problem.csv.") + key + ": missing");
        src.prior = resolve(base_dir, field<std::string>(s, "prior", "problem.csv.", ""));
        src.eval = resolve(base_dir, field<std::string>(s, "eval", "problem.csv.", ""));
        src.experts = expert_paths(s.at("experts"), base_dir);
        c.csv = src;
    }

    if (j.contains("strategies")) {
        c.strategies.clear();
        for (const auto& name : field<std::vector<std::string>>(j, "strategies", "", {})) {
            try {
                c.strategies.push_back(parse_method(name));
            } catch (const ConfigError& ex) {
                throw ConfigError(std::string("strategies: ") + ex.what());
            }
        }
    }
    c.budgets = field(j, "budgets", "", c.budgets);
    c.eta = field(j, "eta", "", c.eta);
    if (j.contains("loss") && !j.at("loss").is_null()) {
        const json& l = j.at("loss");
        reject_unknown(l, {"kind", "clip"}, "loss.");
        const auto kind = field<std::string>(l, "kind", "loss.", "squared");
        if (kind == "squared")
            c.loss.kind = LossKind::squared;
        else if (kind == "absolute")
            c.loss.kind = LossKind::absolute;
        else
            throw ConfigError("loss.kind: unknown loss '" + kind + "'");
        if (l.contains("clip") && !l.at("clip").is_null())
            c.loss.clip = field<double>(l, "clip", "loss.", 0.0);
    }
    c.ets_grid_size = field(j, "ets_grid_size", "", c.ets_grid_size);
    c.runs_per_setting = field(j, "runs_per_setting", "", c.runs_per_setting);
    c.alpha = field(j, "alpha", "", c.alpha);
    try {
        c.rmse_mode = parse_rmse_mode(field<std::string>(j, "rmse_mode", "", rmse_mode_name(c.rmse_mode)));
    } catch (const ConfigError& ex) {
        throw ConfigError(std::string("rmse_mode: ") + ex.what());
    }
    const long cap = field<long>(j, "prior_cap", "", static_cast<long>(c.prior_cap));
    if (cap < 0)
        throw ConfigError("prior_cap: must be >= 0");
    c.prior_cap = static_cast<std::size_t>(cap);
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        reject_unknown(s, {"streams", "family"}, "seeds.");
        c.seeds.streams = field(s, "streams", "seeds.", c.seeds.streams);
        c.seeds.family = field(s, "family", "seeds.", c.seeds.family);
    }
    c.output_dir = resolve(base_dir, field<std::string>(j, "output_dir", "", c.output_dir.string()));
    if (j.contains("serve")) {
        const json& s = j.at("serve");
        reject_unknown(s, {"host", "port", "session_dir", "experts", "prior"}, "serve.");
        c.serve.host = field(s, "host", "serve.", c.serve.host);
        c.serve.port = field(s, "port", "serve.", c.serve.port);
        c.serve.session_dir =
            resolve(base_dir, field<std::string>(s, "session_dir", "serve.", c.serve.session_dir.string()));
        if (s.contains("experts") && !s.at("experts").is_null())
            c.serve.experts = resolve(base_dir, field<std::string>(s, "experts", "serve.", ""));
        if (s.contains("prior") && !s.at("prior").is_null())
            c.serve.prior = resolve(base_dir, field<std::string>(s, "prior", "serve.", ""));
    } else {
        c.serve.session_dir = resolve(base_dir, c.serve.session_dir.string());
    }

    c.validate();
    return c;
}

json config_to_json(const RunConfig& c) {
    json j;
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        j["problem"]["synthetic"] = {
            {"streams",
             {{"horizon", s.streams.horizon},
              {"dimension", s.streams.dimension},
              {"process", process_name(s.streams.process)},
              {"phi", s.streams.phi},
              {"amplitude", s.streams.amplitude},
              {"noise", s.streams.noise}}},
            {"family",
             {{"theta", s.family.theta},
              {"perturbation", s.family.perturbation},
              {"n_models", s.family.n_models},
              {"kappa", s.family.kappa},
              {"target_index", s.family.target_index}}},
            {"prior_episodes", s.prior_episodes},
            {"eval_episodes", s.eval_episodes}};
    } else if (c.csv) {
        json experts = json::array();
        for (const auto& p : c.csv->experts)
            experts.push_back(p.string());
        j["problem"]["csv"] = {{"prior", c.csv->prior.string()}, {"eval", c.csv->eval.string()}, {"experts", experts}};
    }
    json strategies = json::array();
    for (Method m : c.strategies)
        strategies.push_back(method_name(m));
    j["strategies"] = strategies;
    j["budgets"] = c.budgets;
    j["eta"] = c.eta;
    j["loss"] = {{"kind", c.loss.kind == LossKind::squared ? "squared" : "absolute"},
                 {"clip", c.loss.clip ? json(*c.loss.clip) : json(nullptr)}};
    j["ets_grid_size"] = c.ets_grid_size;
    j["runs_per_setting"] = c.runs_per_setting;
    j["alpha"] = c.alpha;
    j["rmse_mode"] = rmse_mode_name(c.rmse_mode);
    j["prior_cap"] = c.prior_cap;
    j["seeds"] = {{"streams", c.seeds.streams}, {"family", c.seeds.family}};
    j["output_dir"] = c.output_dir.string();
    j["serve"] = {{"host", c.serve.host},
                  {"port", c.serve.port},
                  {"session_dir", c.serve.session_dir.string()},
                  {"experts", c.serve.experts ? json(c.serve.experts->string()) : json(nullptr)},
                  {"prior", c.serve.prior ? json(c.serve.prior->string()) : json(nullptr)}};
    return j;
}

void RunConfig::validate() const {
    if (synthetic.has_value() == csv.has_value())
        throw ConfigError("problem: exactly one of 'synthetic' or 'csv' is required");
    if (synthetic) {
        try {
            synthetic->streams.validate();
        } catch (const Error& ex) {
            throw ConfigError(std::string("problem.synthetic.streams: ") + ex.what());
        }
        try {
            synthetic->family.validate();
        } catch (const Error& ex) {
            throw ConfigError(std::string("problem.synthetic.family: ") + ex.what());
        }
        if (synthetic->family.theta.size() != static_cast<std::size_t>(synthetic->streams.dimension))
            throw ConfigError("problem.synthetic.family.theta: length must equal streams.dimension");
        if (synthetic->prior_episodes < 0)
            throw ConfigError("problem.synthetic.prior_episodes: must be >= 0");
        if (synthetic->eval_episodes < 1)
            throw ConfigError("problem.synthetic.eval_episodes: must be >= 1");
    }
    if (csv) {
        require_file(csv->prior, "problem.csv.prior");
        require_file(csv->eval, "problem.csv.eval");
        if (csv->experts.size() < 2)
            throw ConfigError("problem.csv.experts: at least two experts are required");
        for (const auto& p : csv->experts)
            require_file(p, "problem.csv.experts");
    }
    if (strategies.empty())
        throw ConfigError("strategies: at least one strategy is required");
    if (budgets.empty())
        throw ConfigError("budgets: at least one budget is required");
    for (int b : budgets)
        if (b < 1)
            throw ConfigError("budgets: every budget must be >= 1");
    if (synthetic)
        for (int b : budgets)
            if (b > synthetic->streams.horizon)
                throw ConfigError("budgets: budget " + std::to_string(b) + " exceeds the horizon");
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw ConfigError("eta: must be a positive finite number");
    try {
        loss.validate();
    } catch (const Error& ex) {
        throw ConfigError(std::string("loss: ") + ex.what());
    }
    if (ets_grid_size < 1)
        throw ConfigError("ets_grid_size: must be >= 1");
    if (runs_per_setting < 1)
        throw ConfigError("runs_per_setting: must be >= 1");
    if (synthetic && runs_per_setting > synthetic->eval_episodes)
        throw ConfigError("runs_per_setting: exceeds problem.synthetic.eval_episodes");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("alpha: must lie in (0, 1)");
    if (serve.port < 0 || serve.port > 65535)
        throw ConfigError("serve.port: must lie in [0, 65535]");
}

void RunConfig::validate_serve() const {
    if (serve.experts)
        require_file(*serve.experts, "serve.experts");
    if (serve.prior)
        require_file(*serve.prior, "serve.prior");
}

ProtocolSpec RunConfig::protocol(int jobs) const {
    ProtocolSpec p;
    p.budgets = budgets;
    p.strategies = strategies;
    p.runs_per_setting = runs_per_setting;
    p.eta = eta;
    p.alpha = alpha;
    p.rmse_mode = rmse_mode;
    p.engine.loss = loss;
    p.engine.ets_grid_size = ets_grid_size;
    p.engine.prior_cap = prior_cap;
    p.jobs = jobs;
    return p;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + ex.what());
    }
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

std::string config_digest(const RunConfig& c) {
    const std::string text = config_to_json(c).dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

GeneratedProblem generate_problem(const SyntheticSource& source, const Seeds& seeds) {
    StreamSpec streams = source.streams;
    streams.seed = seeds.streams;
    SyntheticFamily family = source.family;
    family.seed = seeds.family;

    GeneratedProblem out;
    out.family = gen_family(family);
    out.problem.committee = std::make_shared<const Committee>(out.family.expert_ptrs());
    const auto all = gen_streams(streams, source.prior_episodes + source.eval_episodes);
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (static_cast<int>(k) < source.prior_episodes)
            out.problem.pool.push_back(all.episodes()[k]);
        else
            out.problem.evaluation.push_back(
                std::make_shared<const Episode>(label_with(all.episode(k), *out.family.target)));
    }
    return out;
}

BenchmarkProblem load_problem(const RunConfig& c) {
    if (c.synthetic)
        return generate_problem(*c.synthetic, c.seeds).problem;
    BenchmarkProblem p;
    std::vector<ExpertPtr> experts;
    for (const auto& path : c.csv->experts)
        experts.push_back(load_expert_traces(path));
    p.committee = std::make_shared<const Committee>(std::move(experts));
    for (auto& ep : load_episode_file(c.csv->eval))
        p.evaluation.push_back(std::make_shared<const Episode>(std::move(ep)));
    for (auto& ep : load_episode_file(c.csv->prior))
        p.pool.push_back(std::make_shared<const Episode>(std::move(ep)));
    return p;
}

json models_to_json(std::span<const std::shared_ptr<const LinearResponseModel>> models) {
    json list = json::array();
    for (const auto& m : models)
        list.push_back({{"id", m->id()}, {"theta", m->theta()}, {"kappa", m->kappa()}});
    return {{"models", list}};
}

std::vector<std::shared_ptr<const LinearResponseModel>> load_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open model file '" + path.string() + "'");
    std::vector<std::shared_ptr<const LinearResponseModel>> out;
    try {
        const json j = json::parse(in);
        for (const auto& m : j.at("models"))
            out.push_back(std::make_shared<const LinearResponseModel>(
                m.at("id").get<std::string>(), m.at("theta").get<std::vector<double>>(), m.at("kappa").get<double>()));
    } catch (const json::exception& ex) {
        throw ConfigError("model file '" + path.string() + "': " + ex.what());
    } catch (const ValidationError& ex) {
        throw ConfigError("model file '" + path.string() + "': " + ex.what());
    }
    if (out.size() < 2)
        throw ConfigError("model file '" + path.string() + "': at least two models are required");
    return out;
}

} // namespace boal
