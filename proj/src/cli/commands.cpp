#include "boal/commands.hpp"

#include "boal/advisor.hpp"
#include "boal/error.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace boal {

using nlohmann::json;

namespace {

// Shared error policy for every command.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& ex) {
        err << "configuration error: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitRuntime;
    }
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw RunError("cannot write '" + path.string() + "'");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out)
        throw RunError("failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

std::string problem_label(const RunConfig& c) {
    return c.synthetic ? "synthetic" : c.csv->eval.stem().string();
}

std::string cell(double v, int width, const char* suffix = "") {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%*.4f%s", width, v, suffix);
    return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = true) {
    if (s.size() >= width)
        return s;
    const std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

std::string centered(const std::string& s, std::size_t width) {
    if (s.size() >= width)
        return s;
    const std::size_t left = (width - s.size()) / 2;
    return std::string(left, ' ') + s + std::string(width - s.size() - left, ' ');
}

constexpr std::size_t kLabelWidth = 14;
constexpr std::size_t kCellWidth = 9;

} // namespace

std::string format_rmse_grid(const ProtocolResult& result, const std::string& label) {
    const bool has_base = std::find(result.strategies.begin(), result.strategies.end(), Method::base) !=
                          result.strategies.end();
    std::vector<Method> querying;
    for (Method m : result.strategies)
        if (m != Method::base)
            querying.push_back(m);

    std::ostringstream os;
    const std::size_t group = querying.size() * kCellWidth;
    os << pad("", kLabelWidth, false);
    if (has_base)
        os << pad("", kCellWidth) << " |";
    for (int b : result.budgets)
        os << centered(std::to_string(b) + (b == 1 ? " sample" : " samples"), group) << " |";
    os << '\n' << pad("problem", kLabelWidth, false);
    if (has_base)
        os << pad("Base", kCellWidth) << " |";
    for (std::size_t g = 0; g < result.budgets.size(); ++g) {
        for (Method m : querying)
            os << pad(method_name(m) + " ", kCellWidth);
        os << " |";
    }
    os << '\n' << pad(label, kLabelWidth, false);
    if (has_base)
        os << cell(result.cell(Method::base, result.budgets.front()).mean_rmse, kCellWidth - 1) << " " << " |";
    for (int b : result.budgets) {
        for (Method m : querying) {
            bool significant = false;
            if (has_base) {
                const auto& test = result.test(b, Method::base, m);
                significant = test.result && test.result->significant;
            }
            os << cell(result.cell(m, b).mean_rmse, kCellWidth - 1, significant ? "*" : " ");
        }
        os << " |";
    }
    os << '\n';
    if (has_base)
        os << "* significant difference from Base (paired Wilcoxon signed-rank)\n";
    return os.str();
}

std::string format_score_grid(const ScoreStudy& study, const std::string& label) {
    std::ostringstream os;
    const std::size_t group = (study.methods.size() + 1) * kCellWidth;
    os << pad("", kLabelWidth, false);
    for (const auto& row : study.rows)
        os << centered(std::to_string(row.budget) + (row.budget == 1 ? " sample" : " samples"), group) << " |";
    os << '\n' << pad("problem", kLabelWidth, false);
    for (std::size_t g = 0; g < study.rows.size(); ++g) {
        for (Method m : study.methods)
            os << pad(method_name(m) + " ", kCellWidth);
        os << pad("Max ", kCellWidth) << " |";
    }
    os << '\n' << pad(label, kLabelWidth, false);
    for (const auto& row : study.rows) {
        for (Method m : study.methods)
            os << cell(row.selected.at(m), kCellWidth - 1, " ");
        os << cell(row.max_oracle, kCellWidth - 1, " ") << " |";
    }
    os << '\n';
    return os.str();
}

int cmd_bench(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!config.synthetic)
            throw ConfigError("problem.synthetic: bench needs a synthetic problem");
        const auto generated = generate_problem(*config.synthetic, config.seeds);
        const auto& problem = generated.problem;

        const auto dir = config.output_dir;
        std::filesystem::create_directories(dir / "experts");
        std::filesystem::create_directories(dir / "target");

        write_episodes(dir / "prior_episodes.csv", problem.pool);
        write_episodes(dir / "eval_episodes.csv", problem.evaluation);

        // Traces cover every episode a run can touch: evaluation targets and priors.
        std::vector<EpisodePtr> all = problem.pool;
        all.insert(all.end(), problem.evaluation.begin(), problem.evaluation.end());
        for (const auto& expert : generated.family.experts)
            write_expert_trace(dir / "experts" / (expert->id() + ".csv"), *expert, all);
        const auto& target = *generated.family.target;
        write_expert_trace(dir / "target" / (target.id() + ".csv"), target, all);

        write_json(dir / "models.json", models_to_json(generated.family.experts));
        const std::vector<std::shared_ptr<const LinearResponseModel>> target_only{generated.family.target};
        write_json(dir / "target.json", models_to_json(target_only));

        out << "wrote " << problem.pool.size() << " prior and " << problem.evaluation.size()
            << " evaluation episodes, " << generated.family.experts.size() << " expert traces and 1 target trace to "
            << dir.string() << '\n';
        return kExitOk;
    });
}

int cmd_run(const RunConfig& config, int jobs, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ProtocolSpec spec = config.protocol(jobs);
        const BenchmarkProblem problem = load_problem(config);
        const ProtocolResult result = run_protocol(spec, problem);

        const auto dir = config.output_dir;
        std::filesystem::create_directories(dir);

        const auto csv_path = dir / "results.csv";
        auto csv = open_output(csv_path);
        csv << "strategy,budget,episode_id,rmse,mean_selected_score\n";
        for (const auto& run : result.runs) {
            csv << method_name(run.method) << ',' << run.budget << ',' << run.episode_id << ','
                << format_number(run.rmse) << ',';
            if (!run.selected_scores.empty())
                csv << format_number(std::accumulate(run.selected_scores.begin(), run.selected_scores.end(), 0.0) /
                                     static_cast<double>(run.selected_scores.size()));
            csv << '\n';
        }
        finish(csv, csv_path);

        json cells = json::array();
        for (const auto& c : result.cells) {
            json entry = {{"strategy", method_name(c.method)}, {"budget", c.budget}, {"mean_rmse", c.mean_rmse}};
            entry["mean_selected_score"] = c.mean_selected_score ? json(*c.mean_selected_score) : json(nullptr);
            entry["mean_hindsight_score"] = c.mean_hindsight_score ? json(*c.mean_hindsight_score) : json(nullptr);
            cells.push_back(entry);
        }
        json tests = json::array();
        for (const auto& t : result.tests) {
            json entry = {{"budget", t.budget}, {"a", method_name(t.a)}, {"b", method_name(t.b)}};
            if (t.result) {
                entry["p_value"] = t.result->p_value;
                entry["statistic"] = t.result->statistic;
                entry["n"] = t.result->n;
                entry["exact"] = t.result->exact;
                entry["significant"] = t.result->significant;
                entry["direction"] = t.result->direction;
            } else {
                entry["p_value"] = nullptr;
                entry["note"] = t.note;
            }
            tests.push_back(entry);
        }
        json max_oracle = json::object();
        for (const auto& [b, v] : result.max_oracle)
            max_oracle[std::to_string(b)] = v;
        json strategies = json::array();
        for (Method m : result.strategies)
            strategies.push_back(method_name(m));
        write_json(dir / "summary.json", {{"config_digest", config_digest(config)},
                                          {"budgets", result.budgets},
                                          {"strategies", strategies},
                                          {"episodes", result.episode_ids.size()},
                                          {"rmse_mode", rmse_mode_name(spec.rmse_mode)},
                                          {"alpha", spec.alpha},
                                          {"cells", cells},
                                          {"tests", tests},
                                          {"max_oracle", max_oracle}});

        out << format_rmse_grid(result, problem_label(config));
        return kExitOk;
    });
}

int cmd_scores(const RunConfig& config, int jobs, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        ProtocolSpec spec = config.protocol(jobs);
        // The comparison covers the stopping rules; UNI and Base ignore the scores.
        std::vector<Method> rules;
        for (Method m : spec.strategies)
            if (m != Method::base && m != Method::uniform)
                rules.push_back(m);
        if (rules.empty())
            throw ConfigError("strategies: the score comparison needs SA, PSA or ETS");
        spec.strategies = rules;
        const BenchmarkProblem problem = load_problem(config);
        const ScoreStudy study = run_score_study(spec, problem);

        const auto dir = config.output_dir;
        std::filesystem::create_directories(dir);
        const auto csv_path = dir / "scores.csv";
        auto csv = open_output(csv_path);
        csv << "budget,strategy,mean_selected_score,mean_hindsight_score\n";
        json rows = json::array();
        for (const auto& row : study.rows) {
            json entry = {{"budget", row.budget}, {"max_oracle", row.max_oracle}};
            for (Method m : study.methods) {
                csv << row.budget << ',' << method_name(m) << ',' << format_number(row.selected.at(m)) << ','
                    << format_number(row.hindsight.at(m)) << '\n';
                entry["selected"][method_name(m)] = row.selected.at(m);
                entry["hindsight"][method_name(m)] = row.hindsight.at(m);
            }
            csv << row.budget << ",Max," << format_number(row.max_oracle) << ',' << format_number(row.max_oracle)
                << '\n';
            rows.push_back(entry);
        }
        finish(csv, csv_path);
        write_json(dir / "scores.json", {{"config_digest", config_digest(config)}, {"rows", rows}});

        out << format_score_grid(study, problem_label(config));
        return kExitOk;
    });
}

int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config.validate_serve();
        if (config.serve.experts)
            load_models(*config.serve.experts); // fail at startup, not on the first request
        if (config.serve.prior)
            load_episodes(*config.serve.prior);
        AdvisorOptions options;
        options.session_dir = config.serve.session_dir;
        options.default_experts = config.serve.experts;
        options.default_prior = config.serve.prior;
        options.config_digest = config_digest(config);
        AdvisorService service(options);
        AdvisorServer server(service);
        out << "advisor listening on " << config.serve.host << ':' << config.serve.port << " ("
            << service.session_count() << " sessions restored)" << std::endl;
        if (!server.listen(config.serve.host, config.serve.port)) {
            err << "error: cannot bind " << config.serve.host << ':' << config.serve.port << '\n';
            return kExitRuntime;
        }
        return kExitOk;
    });
}

} // namespace boal
