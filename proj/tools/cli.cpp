#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bbip/bbip.hpp"

namespace bbip::cli {

namespace {

namespace fs = std::filesystem;

/// Options shared by every subcommand that trains a model.
struct TrainingFlags {
    std::size_t basis_count = BasisConfig{}.count;
    std::optional<double> basis_width;
    double ridge = BasisConfig{}.ridge;
    double noise_floor = BasisConfig{}.noise_floor;
    double q_phase = ProcessNoise{}.phase;
    double q_velocity = ProcessNoise{}.phase_velocity;
    double q_weight = ProcessNoise{}.weight;
    bool no_outlier_rejection = false;
    double outlier_sigma = OutlierOptions{}.sigma_threshold;
    double lda_shrinkage = LdaOptions{}.shrinkage;

    void attach(CLI::App& app) {
        app.add_option("--basis-count", basis_count, "Gaussian basis functions per DoF")->check(CLI::PositiveNumber);
        app.add_option("--basis-width", basis_width, "Basis width in phase units (default 1.5 / count)");
        app.add_option("--ridge", ridge, "Ridge regularization of the weight fit")->check(CLI::NonNegativeNumber);
        app.add_option("--noise-floor", noise_floor, "Floor on the per-DoF measurement noise variance")
            ->check(CLI::PositiveNumber);
        app.add_option("--q-phase", q_phase, "Process noise variance of the phase")->check(CLI::NonNegativeNumber);
        app.add_option("--q-velocity", q_velocity, "Process noise variance of the phase velocity")
            ->check(CLI::NonNegativeNumber);
        app.add_option("--q-weight", q_weight, "Process noise variance of each basis weight")
            ->check(CLI::NonNegativeNumber);
        app.add_flag("--no-outlier-rejection", no_outlier_rejection, "Keep every demonstration");
        app.add_option("--outlier-sigma", outlier_sigma, "Outlier threshold in standard deviations")
            ->check(CLI::PositiveNumber);
        app.add_option("--lda-shrinkage", lda_shrinkage, "Relative ridge added to the within-class scatter")
            ->check(CLI::NonNegativeNumber);
    }

    [[nodiscard]] TrainConfig config() const {
        TrainConfig cfg;
        cfg.basis.count = basis_count;
        cfg.basis.width = basis_width;
        cfg.basis.ridge = ridge;
        cfg.basis.noise_floor = noise_floor;
        cfg.process_noise = ProcessNoise{q_phase, q_velocity, q_weight};
        cfg.reject_outliers = !no_outlier_rejection;
        cfg.outliers.sigma_threshold = outlier_sigma;
        cfg.lda.shrinkage = lda_shrinkage;
        return cfg;
    }
};

/// Options controlling how a session forms class posteriors and phases.
struct SessionFlags {
    std::string posterior_mode = "per-frame";
    double smoothing_half_life = 0.0;
    std::string phase_mode = "per-class";

    void attach(CLI::App& app) {
        app.add_option("--posterior-mode", posterior_mode, "per-frame or cumulative")
            ->check(CLI::IsMember({"per-frame", "cumulative"}));
        app.add_option("--smoothing", smoothing_half_life, "Posterior smoothing half-life in frames (0 = off)")
            ->check(CLI::NonNegativeNumber);
        app.add_option("--phase-mode", phase_mode, "per-class or fused")->check(CLI::IsMember({"per-class", "fused"}));
    }

    [[nodiscard]] SessionOptions options() const {
        SessionOptions o;
        o.posterior_mode = posterior_mode == "cumulative" ? PosteriorMode::cumulative : PosteriorMode::per_frame;
        o.smoothing_half_life = smoothing_half_life;
        o.phase_mode = phase_mode == "fused" ? PhaseMode::fused : PhaseMode::per_class;
        return o;
    }
};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

std::string format_vector(const Eigen::VectorXd& v) {
    std::vector<std::string> parts;
    for (Eigen::Index i = 0; i < v.size(); ++i) parts.push_back(format_double(v(i)));
    return join(parts, " ");
}

/// CSV-safe column name.
std::string column(const std::string& name) {
    std::string out = name;
    std::replace_if(out.begin(), out.end(), [](char ch) { return ch == ',' || ch == '"' || ch == '\n'; }, '_');
    return out;
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

/// Reads trajectory records from a path, "-" meaning the given stream.
std::vector<TrajectoryRecord> read_input_records(const std::string& path, std::istream& in) {
    if (path == "-") {
        std::ostringstream ss;
        ss << in.rdbuf();
        std::istringstream text(ss.str());
        return read_records(text, "<stdin>");
    }
    std::istringstream text(read_file(path));
    return read_records(text, path);
}

std::map<std::string, std::vector<Demonstration>> group_for_training(const std::vector<Demonstration>& demos,
                                                                     bool classes_from_labels) {
    if (!classes_from_labels) return single_class(demos);
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (!demos[i].class_label()) {
            throw ConfigError("--classes-from-labels: demonstration " + std::to_string(i) + " has no class label");
        }
    }
    return group_by_label(demos);
}

std::string training_report_text(const TrainResult& result, const std::string& source, std::uint64_t seed) {
    const auto& model = result.model;
    const auto& report = result.report;
    std::ostringstream out;
    out << "# bbip training report\n";
    out << "source = " << source << "\n";
    out << "seed = " << seed << "\n";
    out << "classes = " << model.class_count() << "\n";
    out << "members = " << model.member_count() << "\n";
    out << "dofs = " << model.layout().dof_count() << "\n";
    out << "roles = " << model.layout().roles() << "\n";
    out << "basis_count = " << model.basis().count() << "\n";
    out << "basis_width = " << format_double(model.basis().width()) << "\n";
    for (const auto& c : report.classes) {
        out << "\n[class " << c.name << "]\n";
        out << "demonstrations = " << c.input_count << "\n";
        out << "members = " << c.member_count << "\n";
        std::vector<std::string> rejected;
        for (auto r : c.rejected) rejected.push_back(std::to_string(r));
        out << "rejected_outliers = " << (rejected.empty() ? "none" : join(rejected, " ")) << "\n";
    }
    out << "\n[fit]\n";
    for (std::size_t d = 0; d < model.layout().dof_count(); ++d) {
        out << "rmse." << model.layout().name(d) << " = " << format_double(report.fit_rmse(static_cast<Eigen::Index>(d)))
            << "\n";
    }
    out << "noise_variance = " << format_vector(report.noise_variance) << "\n";
    out << "\n[classifier]\n";
    out << "lda_eigenvalues = " << (report.lda_eigenvalues.size() ? format_vector(report.lda_eigenvalues) : "none")
        << "\n";
    return out.str();
}

nlohmann::ordered_json truth_json(const SyntheticCorpus& corpus, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["format"] = "bbip-truth";
    j["seed"] = seed;
    auto demos = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < corpus.truth.size(); ++i) {
        const auto& t = corpus.truth[i];
        nlohmann::ordered_json d;
        d["index"] = i;
        d["samples"] = t.sample_count;
        d["from_class"] = t.from_class;
        d["to_class"] = t.to_class ? nlohmann::ordered_json(*t.to_class) : nlohmann::ordered_json(nullptr);
        d["switch_index"] = t.switch_index ? nlohmann::ordered_json(*t.switch_index) : nlohmann::ordered_json(nullptr);
        d["blend_width"] = t.blend_width;
        demos.push_back(std::move(d));
    }
    j["demos"] = std::move(demos);
    return j;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
    std::string out_path;
    std::string truth_path;
    std::size_t classes = 3;
    std::size_t per_class = 15;
    std::size_t observed = 3;
    std::size_t controlled = 2;
    std::size_t length = 120;
    double noise = 0.0;
    double duration_jitter = SyntheticConfig{}.duration_jitter;
    double amplitude_jitter = SyntheticConfig{}.amplitude_jitter;
    double offset_jitter = SyntheticConfig{}.offset_jitter;
    std::optional<double> switch_at;
    double blend = SwitchSpec{}.blend;
};

int cmd_synth(const SynthFlags& f, std::uint64_t seed, std::ostream& out) {
    SyntheticConfig cfg;
    cfg.class_count = f.classes;
    cfg.per_class = f.per_class;
    cfg.observed_dofs = f.observed;
    cfg.controlled_dofs = f.controlled;
    cfg.length = f.length;
    cfg.noise = f.noise;
    cfg.duration_jitter = f.duration_jitter;
    cfg.amplitude_jitter = f.amplitude_jitter;
    cfg.offset_jitter = f.offset_jitter;
    if (f.switch_at) cfg.switching = SwitchSpec{*f.switch_at, f.blend};
    cfg.seed = seed;
    const auto corpus = generate_synthetic(cfg);

    const std::string truth_path = f.truth_path.empty() ? f.out_path + ".truth.json" : f.truth_path;
    save_demonstrations(f.out_path, corpus.demos);
    write_file_atomic(truth_path, truth_json(corpus, seed).dump(1) + "\n");
    out << "wrote " << corpus.demos.size() << " demonstrations to " << f.out_path << "\n";
    out << "wrote ground truth to " << truth_path << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
    std::string data_path;
    std::string model_path;
    std::string report_path;
    bool classes_from_labels = false;
    TrainingFlags training;
};

int cmd_train(const TrainFlags& f, std::uint64_t seed, std::ostream& out) {
    const auto demos = load_demonstrations(f.data_path);
    if (demos.empty()) throw ConfigError(f.data_path + " holds no demonstrations");
    const auto result = train_with_report(group_for_training(demos, f.classes_from_labels), f.training.config());
    const std::string report_path = f.report_path.empty() ? f.model_path + ".report.txt" : f.report_path;
    // Report first: the model file only appears once everything else succeeded.
    write_file_atomic(report_path, training_report_text(result, f.data_path, seed));
    save_model(result.model, f.model_path);
    out << "trained " << result.model.class_count() << " class(es), " << result.model.member_count()
        << " ensemble members\n";
    out << "wrote model to " << f.model_path << "\n";
    out << "wrote training report to " << report_path << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- infer

struct InferFlags {
    std::string model_path;
    std::string input_path;
    std::string out_path;
    std::size_t record = 0;
    SessionFlags session;
};

/// Observed-DoF frames (|D_o| x T) of one input record.
Eigen::MatrixXd observed_stream(const TrajectoryRecord& rec, const BbipModel& model, const std::string& source) {
    const auto& layout = model.layout();
    const auto where = source + ":" + std::to_string(rec.line) + ": ";
    if (rec.roles.empty()) {
        if (static_cast<std::size_t>(rec.values.rows()) != layout.observed().size()) {
            throw LayoutError(where + "bare frames have " + std::to_string(rec.values.rows()) +
                              " values per line, model observes " + std::to_string(layout.observed().size()) +
                              " DoFs");
        }
        return rec.values;
    }
    if (rec.roles != layout.roles()) {
        throw LayoutError(where + "record roles '" + rec.roles + "' do not match model roles '" + layout.roles() + "'");
    }
    return select_rows(rec.values, layout.observed());
}

std::string transcript_text(const BbipModel& model, const Eigen::MatrixXd& frames, std::uint64_t seed,
                            const SessionOptions& options) {
    std::ostringstream out;
    out << "frame";
    for (const auto& c : model.classes()) out << ",p_" << column(c);
    for (const auto& c : model.classes()) out << ",phase_" << column(c);
    for (auto d : model.layout().controlled()) out << "," << column(model.layout().name(d));
    out << ",finished\n";

    InferenceSession session(model, seed, options);
    for (Eigen::Index t = 0; t < frames.cols(); ++t) {
        const auto step = session.step(ObservationFrame(frames.col(t), static_cast<std::size_t>(t)));
        out << t;
        for (Eigen::Index c = 0; c < step.class_posterior.size(); ++c) out << "," << format_double(step.class_posterior(c));
        for (const auto& s : step.class_states) out << "," << format_double(s.phase);
        for (Eigen::Index d = 0; d < step.response.size(); ++d) out << "," << format_double(step.response(d));
        out << "," << (step.finished ? 1 : 0) << "\n";
    }
    return out.str();
}

int cmd_infer(const InferFlags& f, std::uint64_t seed, std::istream& in, std::ostream& out) {
    const auto model = load_model(f.model_path);
    const auto records = read_input_records(f.input_path, in);
    if (records.empty()) throw ConfigError("input " + f.input_path + " holds no frames");
    if (f.record >= records.size()) {
        throw ConfigError("--record " + std::to_string(f.record) + " out of range (input has " +
                          std::to_string(records.size()) + " records)");
    }
    const auto frames = observed_stream(records[f.record], model, f.input_path);
    const auto text = transcript_text(model, frames, seed, f.session.options());
    if (f.out_path.empty() || f.out_path == "-") {
        out << text;
    } else {
        write_file_atomic(f.out_path, text);
        out << "wrote " << frames.cols() << " transcript rows to " << f.out_path << "\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
    std::string train_path;
    std::vector<std::string> tests;
    std::vector<std::string> predictors{"bbip", "bip"};
    std::string out_dir;
    std::string pairs;
    double sample_rate = 120.0;
    std::size_t max_lag = 30;
    TrainingFlags training;
    SessionFlags session;
};

std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(const std::string& text, const DofLayout& layout) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (text.empty()) {
        const auto n = std::min(layout.observed().size(), layout.controlled().size());
        for (std::size_t i = 0; i < n; ++i) out.emplace_back(layout.observed()[i], layout.controlled()[i]);
        return out;
    }
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        std::size_t a = 0;
        std::size_t b = 0;
        try {
            if (colon == std::string::npos) throw std::invalid_argument(item);
            std::size_t used = 0;
            a = std::stoul(item.substr(0, colon), &used);
            if (used != colon) throw std::invalid_argument(item);
            b = std::stoul(item.substr(colon + 1), &used);
            if (used != item.size() - colon - 1) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--pairs entries look like OBSERVED:CONTROLLED, got '" + item + "'");
        }
        out.emplace_back(a, b);
    }
    return out;
}

std::string lag_curve_text(const LagResult& lag, double rate) {
    std::ostringstream out;
    out << "lag_samples,lag_seconds,total_correlation\n";
    for (std::size_t l = 0; l < lag.curve.size(); ++l) {
        out << l << "," << format_double(static_cast<double>(l) / rate) << "," << format_double(lag.curve[l]) << "\n";
    }
    return out.str();
}

std::string posterior_trace_text(const BbipModel& model, const EvalReport& report) {
    std::ostringstream out;
    out << "demo,frame";
    for (const auto& c : model.classes()) out << ",p_" << column(c);
    out << "\n";
    for (const auto& d : report.demos) {
        for (Eigen::Index t = 0; t < d.posterior.cols(); ++t) {
            out << d.index << "," << t;
            for (Eigen::Index c = 0; c < d.posterior.rows(); ++c) out << "," << format_double(d.posterior(c, t));
            out << "\n";
        }
    }
    return out.str();
}

int cmd_eval(const EvalFlags& f, std::uint64_t seed, std::ostream& out) {
    for (const auto& p : f.predictors) {
        if (p != "bbip" && p != "bip") throw ConfigError("unknown predictor '" + p + "' (expected bbip or bip)");
    }
    std::vector<std::pair<std::string, std::string>> test_sets;
    for (const auto& t : f.tests) {
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == t.size()) {
            throw ConfigError("--test expects NAME=PATH, got '" + t + "'");
        }
        test_sets.emplace_back(t.substr(0, eq), t.substr(eq + 1));
    }

    const auto train_demos = load_demonstrations(f.train_path);
    if (train_demos.empty()) throw ConfigError(f.train_path + " holds no demonstrations");
    const auto& layout = train_demos.front().layout();
    const auto cfg = f.training.config();

    std::vector<std::pair<std::string, BbipModel>> models;
    for (const auto& p : f.predictors) {
        if (p == "bbip") {
            auto groups = group_for_training(train_demos, true);
            if (groups.size() < 2) throw ConfigError("predictor bbip needs at least 2 labeled classes in " + f.train_path);
            models.emplace_back(p, train(groups, cfg));
        } else {
            models.emplace_back(p, train(single_class(train_demos), cfg));
        }
    }

    CorpusProtocol protocol;
    protocol.seed = seed;
    protocol.session = f.session.options();
    protocol.matched_pairs = parse_pairs(f.pairs, layout);
    protocol.sample_rate = f.sample_rate;
    protocol.max_lag = f.max_lag;

    ensure_directory(f.out_dir);
    const fs::path dir(f.out_dir);
    std::vector<NamedReport> reports;
    for (const auto& [set_name, path] : test_sets) {
        std::istringstream text(read_file(path));
        const auto records = read_records(text, path);
        if (records.empty()) throw ConfigError("test set " + set_name + " (" + path + ") holds no demonstrations");
        std::vector<Demonstration> corpus;
        for (const auto& rec : records) {
            if (rec.roles.empty() || rec.roles.find('c') == std::string::npos) {
                throw Error(ErrorCategory::data, "test set " + set_name + " (" + path + ":" +
                                                     std::to_string(rec.line) +
                                                     ") is missing ground truth: records need controlled DoFs "
                                                     "to score against");
            }
            corpus.push_back(to_demonstration(rec, layout, path));
        }
        for (const auto& [pred, model] : models) {
            auto report = run_corpus(model, corpus, protocol);
            const std::string stem = pred + "_" + set_name;
            write_file_atomic(dir / ("posterior_" + stem + ".csv"), posterior_trace_text(model, report));
            if (report.lag) write_file_atomic(dir / ("lag_" + stem + ".csv"), lag_curve_text(*report.lag, f.sample_rate));
            reports.push_back(NamedReport{pred, set_name, std::move(report)});
        }
    }
    const auto text = format_reports(reports, seed);
    write_file_atomic(dir / "report.txt", text);
    out << text;
    return exit_ok;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string& model_path, std::ostream& out) {
    const auto model = load_model(model_path);
    const auto& layout = model.layout();
    out << "model = " << model_path << "\n";
    out << "version = " << BbipModel::format_version << "\n";
    out << "roles = " << layout.roles() << "\n";
    std::vector<std::string> names;
    for (std::size_t d = 0; d < layout.dof_count(); ++d) names.push_back(layout.name(d));
    out << "names = " << join(names, ",") << "\n";
    out << "basis_count = " << model.basis().count() << "\n";
    out << "basis_width = " << format_double(model.basis().width()) << "\n";
    out << "ridge = " << format_double(model.basis().ridge()) << "\n";
    out << "noise_variance = " << format_vector(model.basis().noise_variance()) << "\n";
    const auto& q = model.process_noise();
    out << "process_noise = " << format_double(q.phase) << " " << format_double(q.phase_velocity) << " "
        << format_double(q.weight) << "\n";
    for (std::size_t c = 0; c < model.class_count(); ++c) {
        const auto& e = model.sub_ensembles()[c];
        out << "class." << model.classes()[c] << ".members = " << e.size() << "\n";
        out << "class." << model.classes()[c] << ".mean_phase_velocity = "
            << format_double(e.states().row(1).mean()) << "\n";
    }
    if (const auto& clf = model.classifier()) {
        out << "classifier_rank = " << clf->rank() << "\n";
        out << "lda_eigenvalues = " << format_vector(clf->eigenvalues()) << "\n";
        out << "priors = " << format_vector(clf->priors()) << "\n";
    } else {
        out << "classifier = none\n";
    }
    return exit_ok;
}

int exit_code_for(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::config: return exit_config;
        case ErrorCategory::data: return exit_data;
        case ErrorCategory::numerical: return exit_numerical;
    }
    return exit_internal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Blending Bayesian interaction primitives: synthesize, train, infer, evaluate"};
    app.name("bbip");
    app.require_subcommand(1);
    std::uint64_t seed = default_seed;
    app.add_option("--seed", seed, "Master seed for every random draw (printed on each run)");

    SynthFlags synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus and its ground truth");
    synth_cmd->add_option("--out,-o", synth.out_path, "Corpus file to write")->required();
    synth_cmd->add_option("--truth", synth.truth_path, "Ground-truth sidecar (default: <out>.truth.json)");
    synth_cmd->add_option("--classes", synth.classes, "Number of interaction classes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--per-class", synth.per_class, "Demonstrations per class")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--observed", synth.observed, "Observed DoFs")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--controlled", synth.controlled, "Controlled DoFs")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--length", synth.length, "Nominal samples per demonstration");
    synth_cmd->add_option("--noise", synth.noise, "Additive white noise standard deviation");
    synth_cmd->add_option("--duration-jitter", synth.duration_jitter, "Relative duration spread");
    synth_cmd->add_option("--amplitude-jitter", synth.amplitude_jitter, "Relative amplitude spread");
    synth_cmd->add_option("--offset-jitter", synth.offset_jitter, "Per-DoF offset standard deviation");
    synth_cmd->add_option("--switch", synth.switch_at, "Switch to the next class at this fraction of each demo");
    synth_cmd->add_option("--blend", synth.blend, "Cross-fade width as a fraction of each demo");

    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a corpus");
    train_cmd->add_option("--data,-d", train_flags.data_path, "Training corpus")->required();
    train_cmd->add_option("--out,-o", train_flags.model_path, "Model file to write")->required();
    train_cmd->add_option("--report", train_flags.report_path, "Training report (default: <out>.report.txt)");
    train_cmd->add_flag("--classes-from-labels", train_flags.classes_from_labels,
                        "One sub-ensemble per class label (default: a single class, i.e. plain BIP)");
    train_flags.training.attach(*train_cmd);

    InferFlags infer;
    auto* infer_cmd = app.add_subcommand("infer", "Stream frames through a model and write a per-step transcript");
    infer_cmd->add_option("--model,-m", infer.model_path, "Model file")->required();
    infer_cmd->add_option("--input,-i", infer.input_path, "Trajectory file or '-' for stdin")->required();
    infer_cmd->add_option("--out,-o", infer.out_path, "Transcript CSV (default: stdout)");
    infer_cmd->add_option("--record", infer.record, "Which record of the input to stream");
    infer.session.attach(*infer_cmd);

    EvalFlags eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictors on held-out corpora");
    eval_cmd->add_option("--train", eval.train_path, "Training corpus (labels select bbip classes)")->required();
    eval_cmd->add_option("--test", eval.tests, "Test corpus as NAME=PATH (repeatable)")->required();
    eval_cmd->add_option("--predictors", eval.predictors, "Comma-separated subset of bbip,bip")->delimiter(',');
    eval_cmd->add_option("--out-dir", eval.out_dir, "Directory for report.txt, lag curves and posterior traces")
        ->required();
    eval_cmd->add_option("--pairs", eval.pairs,
                         "Matched OBSERVED:CONTROLLED DoF indices for lag analysis (default: i-th with i-th)");
    eval_cmd->add_option("--sample-rate", eval.sample_rate, "Frames per second")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--max-lag", eval.max_lag, "Largest lag examined, in samples");
    eval.training.attach(*eval_cmd);
    eval.session.attach(*eval_cmd);

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a model file");
    inspect_cmd->add_option("model", inspect_path, "Model file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        const auto* cmd = app.get_subcommands().front();
        err << "bbip " << cmd->get_name() << ": seed = " << seed << "\n";
        if (cmd == synth_cmd) return cmd_synth(synth, seed, out);
        if (cmd == train_cmd) return cmd_train(train_flags, seed, out);
        if (cmd == infer_cmd) return cmd_infer(infer, seed, in, out);
        if (cmd == eval_cmd) return cmd_eval(eval, seed, out);
        return cmd_inspect(inspect_path, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

}  // namespace bbip::cli
