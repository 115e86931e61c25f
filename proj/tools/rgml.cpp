// Command-line front end: dataset generation, coarse graining, network
// training, measurement, fits, and the built-in experiment pipelines.
//
// Every subcommand takes --config FILE holding flat key=value lines; keys
// match the long option names. $RGML_OUT sets the default experiment root.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rgml/experiment.hpp"

using namespace rgml;

namespace {

MatrixXd load_stacked(const std::vector<std::string>& paths) {
    MatrixXd X;
    for (const auto& path : paths) {
        Ensemble e = load_isng(path);
        MatrixXd M = ensemble_matrix(e);
        if (X.size() == 0) {
            X = std::move(M);
        } else {
            if (X.cols() != M.cols()) throw IoError("input widths differ: " + path);
            X.conservativeResize(X.rows() + M.rows(), Eigen::NoChange);
            X.bottomRows(M.rows()) = M;
        }
    }
    if (X.size() == 0) throw IoError("no input data");
    return X;
}

VhCorrelationMap parse_vh_map_csv(const std::string& text) {
    VhCorrelationMap map;
    size_t pos = 0;
    bool have_side = false;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t s = line.find("side=");
            if (s != std::string::npos) {
                map.side = std::stoi(line.substr(s + 5));
                have_side = true;
            }
            continue;
        }
        std::vector<double> row;
        size_t p = 0;
        while (p <= line.size()) {
            size_t c = line.find(',', p);
            if (c == std::string::npos) c = line.size();
            row.push_back(std::stod(line.substr(p, c - p)));
            p = c + 1;
        }
        Eigen::VectorXd v(row.size());
        for (size_t i = 0; i < row.size(); ++i) v[i] = row[i];
        map.maps.push_back(std::move(v));
    }
    if (map.maps.empty()) throw IoError("map file holds no rows");
    if (!have_side) map.side = static_cast<int>(std::lround(std::sqrt(double(map.maps[0].size()))));
    if (map.side * map.side != map.maps[0].size())
        throw IoError("map row length is not a square lattice");
    return map;
}

CorrelationProfile parse_profile_csv(const std::string& text) {
    CorrelationProfile prof;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty() || line[0] == '#' || line[0] == 'r') continue;
        size_t c1 = line.find(',');
        size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos) continue;
        ProfileEntry en;
        en.r = std::stod(line.substr(0, c1));
        en.value = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        if (c2 != std::string::npos) en.pair_count = std::stoll(line.substr(c2 + 1));
        prof.entries.push_back(en);
    }
    if (prof.entries.empty()) throw IoError("profile file holds no rows");
    return prof;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::string text = read_file(path);
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("config line is not key=value: " + line);
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        size_t vs = val.find_first_not_of(' ');
        val = vs == std::string::npos ? "" : val.substr(vs);
        kv[key] = val;
    }
    return kv;
}

void write_or_print(const std::string& out, const std::string& content) {
    if (out.empty() || out == "-") {
        std::fputs(content.c_str(), stdout);
    } else {
        atomic_write_file(out, content);
        std::printf("wrote %s\n", out.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rgml: lattice coarse graining versus learned layers"};
    app.require_subcommand(1);
    auto add_config = [](CLI::App* sub) {
        sub->set_config("--config", "", "flat key=value option file");
    };

    // sample
    auto* sample = app.add_subcommand("sample", "Metropolis MC ensemble -> dataset file");
    int s_L = 10, s_n = 1000, s_burn = 1000, s_thin = 10, s_chains = 1;
    double s_T = 2.2691853142130221;
    uint64_t s_seed = 1;
    std::string s_out = "sample.isng";
    sample->add_option("--L", s_L, "lattice side");
    sample->add_option("--T", s_T, "temperature (default Tc)");
    sample->add_option("-n,--samples", s_n, "total samples");
    sample->add_option("--burn", s_burn, "burn-in sweeps");
    sample->add_option("--thin", s_thin, "sweeps between samples");
    sample->add_option("--chains", s_chains, "independent chains");
    sample->add_option("--seed", s_seed, "master seed");
    sample->add_option("-o,--out", s_out, "output .isng path");
    add_config(sample);

    // rg
    auto* rg = app.add_subcommand("rg", "block-spin coarse graining steps");
    std::string rg_in, rg_prefix = "rg";
    int rg_steps = 1;
    bool rg_binarize = false;
    std::string rg_policy = "random";
    rg->add_option("-i,--in", rg_in, "input .isng")->required();
    rg->add_option("--steps", rg_steps, "number of halvings");
    rg->add_flag("--binarize-each-step", rg_binarize, "sign-binarize after every step");
    rg->add_option("--zero-policy", rg_policy, "tie policy: random|plus|minus");
    rg->add_option("-o,--out-prefix", rg_prefix, "writes <prefix>_stageK.isng");
    add_config(rg);

    // train-rbm
    auto* trbm = app.add_subcommand("train-rbm", "contrastive-divergence training");
    std::vector<std::string> tr_in;
    int tr_hidden = 81, tr_iters = 500, tr_batch = 0, tr_cd = 1;
    double tr_lr = 0.01;
    bool tr_stochastic = false;
    uint64_t tr_seed = 1;
    std::string tr_out = "rbm.ckpt", tr_curves;
    trbm->add_option("-i,--in", tr_in, "input .isng files (stacked)")->required();
    trbm->add_option("--hidden", tr_hidden, "hidden units");
    trbm->add_option("--iterations", tr_iters, "CD iterations");
    trbm->add_option("--batch", tr_batch, "minibatch size (0 = full)");
    trbm->add_option("--cd-steps", tr_cd, "reconstruction rounds per update");
    trbm->add_option("--lr", tr_lr, "learning rate");
    trbm->add_flag("--stochastic", tr_stochastic, "sampled propagation");
    trbm->add_option("--seed", tr_seed, "seed");
    trbm->add_option("-o,--out", tr_out, "checkpoint path");
    trbm->add_option("--curves", tr_curves, "training stats CSV");
    add_config(trbm);

    // stack-train
    auto* stack = app.add_subcommand("stack-train", "layerwise pretraining of a stack");
    std::vector<std::string> st_in;
    std::vector<int> st_sizes;
    int st_iters = 500, st_batch = 0;
    double st_lr = 0.01;
    uint64_t st_seed = 1;
    std::string st_prefix = "stack";
    stack->add_option("-i,--in", st_in, "input .isng files")->required();
    stack->add_option("--sizes", st_sizes, "layer sizes, input width first")->required();
    stack->add_option("--iterations", st_iters, "CD iterations per layer");
    stack->add_option("--batch", st_batch, "minibatch size (0 = full)");
    stack->add_option("--lr", st_lr, "learning rate");
    stack->add_option("--seed", st_seed, "seed");
    stack->add_option("-o,--out-prefix", st_prefix, "writes <prefix>_layerK.ckpt");
    add_config(stack);

    // flow
    auto* flow = app.add_subcommand("flow", "iterated reconstruction flow");
    std::string fl_rbm, fl_in, fl_prefix = "flow", fl_mode = "expectation";
    int fl_steps = 26;
    uint64_t fl_seed = 1;
    flow->add_option("--rbm", fl_rbm, "trained checkpoint")->required();
    flow->add_option("-i,--in", fl_in, "initial .isng")->required();
    flow->add_option("--steps", fl_steps, "flow length");
    flow->add_option("--mode", fl_mode, "expectation|stochastic");
    flow->add_option("--seed", fl_seed, "seed (stochastic mode)");
    flow->add_option("-o,--out-prefix", fl_prefix, "writes <prefix>_stageK.isng");
    add_config(flow);

    // train-classifier
    auto* tclf = app.add_subcommand("train-classifier",
                                    "temperature classifier on a native MC grid");
    int tc_L = 10, tc_per = 200, tc_epochs = 300, tc_batch = 256, tc_burn = 1000, tc_thin = 10;
    double tc_lr = 0.1, tc_val = 0.4;
    uint64_t tc_seed = 1;
    std::string tc_out = "classifier.ckpt", tc_curves;
    tclf->add_option("--L", tc_L, "lattice side");
    tclf->add_option("--per-temp", tc_per, "samples per temperature bin");
    tclf->add_option("--epochs", tc_epochs, "training epochs");
    tclf->add_option("--batch", tc_batch, "minibatch size (0 = full)");
    tclf->add_option("--lr", tc_lr, "learning rate");
    tclf->add_option("--val-fraction", tc_val, "validation fraction");
    tclf->add_option("--burn", tc_burn, "MC burn-in sweeps");
    tclf->add_option("--thin", tc_thin, "MC thinning sweeps");
    tclf->add_option("--seed", tc_seed, "seed");
    tclf->add_option("-o,--out", tc_out, "checkpoint path");
    tclf->add_option("--curves", tc_curves, "learning curves CSV");
    add_config(tclf);

    // measure-temp
    auto* meas = app.add_subcommand("measure-temp", "classifier temperature measurement");
    std::string mt_clf, mt_in, mt_out, mt_mode = "ensemble";
    uint64_t mt_seed = 1;
    meas->add_option("--clf", mt_clf, "classifier checkpoint")->required();
    meas->add_option("-i,--in", mt_in, "input .isng")->required();
    meas->add_option("--mode", mt_mode, "ensemble|config");
    meas->add_option("--seed", mt_seed, "tie-break seed for real-valued inputs");
    meas->add_option("-o,--out", mt_out, "output CSV (default stdout)");
    add_config(meas);

    // correlate
    auto* corr = app.add_subcommand("correlate", "two-point function by exact distance");
    std::string co_in, co_out, co_field = "spin";
    corr->add_option("-i,--in", co_in, "input .isng")->required();
    corr->add_option("--field", co_field, "spin|epsilon");
    corr->add_option("-o,--out", co_out, "output CSV (default stdout)");
    add_config(corr);

    // vh-map
    auto* vh = app.add_subcommand("vh-map", "visible-hidden correlation maps");
    std::string vh_vis, vh_hid, vh_rbm, vh_out;
    vh->add_option("--visible", vh_vis, "visible .isng")->required();
    vh->add_option("--hidden", vh_hid, "hidden .isng (coarse configs)");
    vh->add_option("--rbm", vh_rbm, "checkpoint: hidden = expectation activations");
    vh->add_option("-o,--out", vh_out, "output CSV (default stdout)");
    add_config(vh);

    // patch-corr
    auto* patch = app.add_subcommand("patch-corr", "patch correlator of a map");
    std::string pc_map, pc_synth, pc_out;
    int pc_L = 32, pc_block = 8;
    uint64_t pc_seed = 1;
    patch->add_option("--map", pc_map, "vh map CSV from vh-map");
    patch->add_option("--synthetic", pc_synth, "checkerboard|white-noise control map");
    patch->add_option("--L", pc_L, "synthetic map side");
    patch->add_option("--block", pc_block, "checkerboard block size");
    patch->add_option("--seed", pc_seed, "white-noise seed");
    patch->add_option("-o,--out", pc_out, "output CSV (default stdout)");
    add_config(patch);

    // fit
    auto* fit = app.add_subcommand("fit", "power-law and magnetization fits");
    std::string ft_profile, ft_points, ft_out;
    double ft_rmin = 0, ft_rmax = 0, ft_Tc = 2.2691853142130221;
    int ft_L = 0;
    fit->add_option("--profile", ft_profile, "profile CSV -> amplitude * r^(-2 Delta)");
    fit->add_option("--points", ft_points, "(T,m) CSV -> amplitude * |T-Tc|^Delta");
    fit->add_option("--r-min", ft_rmin, "fit range lower edge");
    fit->add_option("--r-max", ft_rmax, "fit range upper edge");
    fit->add_option("--L", ft_L, "lattice side for the default range");
    fit->add_option("--Tc", ft_Tc, "critical temperature for magnetization fits");
    fit->add_option("-o,--out", ft_out, "output CSV (default stdout)");
    add_config(fit);

    // theory-check
    auto* theory = app.add_subcommand("theory-check", "exact small-system identities");
    std::string th_out;
    uint64_t th_seed = 1;
    theory->add_option("-o,--out", th_out, "output root (default $RGML_OUT or out)");
    theory->add_option("--seed", th_seed, "seed");
    add_config(theory);

    // experiment run
    auto* exper = app.add_subcommand("experiment", "built-in figure pipelines");
    exper->require_subcommand(1);
    auto* run = exper->add_subcommand("run", "run a built-in experiment or a config file");
    std::string ex_name, ex_out;
    bool ex_paper = false;
    uint64_t ex_seed = 1;
    std::vector<std::string> ex_sets;
    run->add_option("name", ex_name, "built-in name or key=value config file")->required();
    run->add_option("-o,--out", ex_out, "output root (default $RGML_OUT or out)");
    run->add_flag("--paper-scale", ex_paper, "restore published budgets");
    run->add_option("--seed", ex_seed, "master seed");
    run->add_option("--set", ex_sets, "override knob, key=value (repeatable)");
    auto* list = exper->add_subcommand("list", "list built-in experiments");

    // dataset inspect|convert
    auto* ds = app.add_subcommand("dataset", "dataset file tooling");
    ds->require_subcommand(1);
    auto* inspect = ds->add_subcommand("inspect", "print dataset header");
    std::string in_path;
    inspect->add_option("path", in_path, "dataset file")->required();
    auto* convert = ds->add_subcommand("convert", "convert .isng <-> .csv by extension");
    std::string cv_in, cv_out;
    convert->add_option("in", cv_in, "input path")->required();
    convert->add_option("out", cv_out, "output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) {
            McSchedule sched{s_burn, s_thin, s_n};
            Ensemble e = s_chains > 1
                             ? sample_ensemble_chains(IsingModel{}, s_L, s_T, sched, s_seed,
                                                      s_chains)
                             : sample_ensemble(IsingModel{}, s_L, s_T, sched, s_seed);
            save_isng(e, s_out);
            std::printf("wrote %s: L=%d n=%zu T=%s\n", s_out.c_str(), s_L, e.size(),
                        fmt_double(s_T).c_str());
        } else if (*rg) {
            Ensemble in = load_isng(rg_in);
            ZeroPolicy pol = rg_policy == "plus"    ? ZeroPolicy::plus
                             : rg_policy == "minus" ? ZeroPolicy::minus
                                                    : ZeroPolicy::random_fair_coin;
            RgFlowTrace trace = rg_flow(in, rg_steps, rg_binarize, pol);
            for (int k = 1; k <= rg_steps; ++k) {
                std::string path = rg_prefix + "_stage" + std::to_string(k) + ".isng";
                save_isng(trace.stages[k], path);
                std::printf("wrote %s: side=%d\n", path.c_str(), trace.stages[k].side());
            }
        } else if (*trbm) {
            MatrixXd X = load_stacked(tr_in);
            RbmParams p = init_rbm(static_cast<int>(X.cols()), tr_hidden, Rng(tr_seed).derive(1).seed());
            CdConfig cd;
            cd.learning_rate = tr_lr;
            cd.iterations = tr_iters;
            cd.batch_size = tr_batch;
            cd.cd_steps = tr_cd;
            cd.propagation = tr_stochastic ? Propagation::stochastic : Propagation::expectation;
            cd.seed = Rng(tr_seed).derive(2).seed();
            TrainStats st = train(p, X, cd);
            atomic_write_file(tr_out, serialize_rbm(p, cd.propagation, tr_seed));
            std::printf("wrote %s: %dx%d, final recon %s\n", tr_out.c_str(), p.n_visible(),
                        p.n_hidden(), fmt_double(st.reconstruction_error.back()).c_str());
            if (!tr_curves.empty()) write_or_print(tr_curves, train_stats_to_csv(st));
        } else if (*stack) {
            MatrixXd X = load_stacked(st_in);
            CdConfig cd;
            cd.learning_rate = st_lr;
            cd.iterations = st_iters;
            cd.batch_size = st_batch;
            cd.seed = st_seed;
            std::vector<RbmParams> layers = stack_train(X, st_sizes, cd);
            for (size_t i = 0; i < layers.size(); ++i) {
                std::string path = st_prefix + "_layer" + std::to_string(i + 1) + ".ckpt";
                atomic_write_file(path, serialize_rbm(layers[i], cd.propagation, st_seed));
                std::printf("wrote %s: %dx%d\n", path.c_str(), layers[i].n_visible(),
                            layers[i].n_hidden());
            }
        } else if (*flow) {
            RbmParams p = deserialize_rbm(read_file(fl_rbm));
            Ensemble in = load_isng(fl_in);
            Propagation mode =
                fl_mode == "stochastic" ? Propagation::stochastic : Propagation::expectation;
            FlowTrace trace = generate_flow(p, ensemble_matrix(in), fl_steps, mode, fl_seed);
            int side = in.side();
            for (int k = 0; k <= fl_steps; ++k) {
                std::string path = fl_prefix + "_stage" + std::to_string(k) + ".isng";
                save_isng(stage_to_ensemble(trace.stages[k], side, in.temperature(),
                                            Rng(fl_seed).derive(k).seed(), mode, k),
                          path);
            }
            std::printf("wrote %s_stage0..%d.isng\n", fl_prefix.c_str(), fl_steps);
        } else if (*tclf) {
            McSchedule sched{tc_burn, tc_thin, 0};
            TempBins bins = TempBins::default_bins();
            auto [X, labels] = grid_dataset(tc_L, tc_per, sched, Rng(tc_seed).derive(1).seed(), bins);
            MlpParams p = init_mlp(tc_L * tc_L, default_hidden_size(tc_L * tc_L), bins.size(),
                                   Rng(tc_seed).derive(2).seed());
            MlpTrainConfig cfg;
            cfg.learning_rate = tc_lr;
            cfg.epochs = tc_epochs;
            cfg.validation_fraction = tc_val;
            cfg.batch_size = tc_batch;
            cfg.seed = Rng(tc_seed).derive(3).seed();
            LearningCurves curves = train_classifier(p, X, labels, cfg);
            atomic_write_file(tc_out, serialize_mlp(p, tc_seed));
            std::printf("wrote %s: final val loss %s\n", tc_out.c_str(),
                        fmt_double(curves.val_loss.back()).c_str());
            if (!tc_curves.empty()) write_or_print(tc_curves, curves_to_csv(curves));
        } else if (*meas) {
            MlpParams p = deserialize_mlp(read_file(mt_clf));
            Ensemble in = load_isng(mt_in);
            MatrixXd X = ensemble_matrix(in);
            if (in.kind() == Kind::real) {
                Rng tie(mt_seed);
                X = binarize_rows(X, tie);
            }
            TempBins bins = TempBins::default_bins();
            std::string csv;
            if (mt_mode == "config") {
                csv = "index,measured_T\n";
                std::vector<int> b = classify_rows(p, X);
                for (size_t i = 0; i < b.size(); ++i)
                    csv += std::to_string(i) + "," + fmt_double(bins.temperatures[b[i]]) + "\n";
            } else {
                VectorXd mean = measure_ensemble(p, X);
                int best;
                mean.maxCoeff(&best);
                csv = "# measured_T=" + fmt_double(bins.temperatures[best]) + "\nbin_T,mean_prob\n";
                for (int b = 0; b < bins.size(); ++b)
                    csv += fmt_double(bins.temperatures[b]) + "," + fmt_double(mean[b]) + "\n";
            }
            write_or_print(mt_out, csv);
        } else if (*corr) {
            Ensemble in = load_isng(co_in);
            FieldKind field = co_field == "epsilon" ? FieldKind::epsilon : FieldKind::spin;
            write_or_print(co_out, profile_to_csv(two_point_function(in, field)));
        } else if (*vh) {
            Ensemble vis = load_isng(vh_vis);
            VhCorrelationMap map;
            if (!vh_rbm.empty()) {
                RbmParams p = deserialize_rbm(read_file(vh_rbm));
                Rng prop(1);
                MatrixXd V = ensemble_matrix(vis);
                MatrixXd H = detail::propagate_hidden(p, V, Propagation::expectation, prop);
                map = vh_correlator(V, H, vis.side());
            } else if (!vh_hid.empty()) {
                map = vh_correlator(vis, load_isng(vh_hid));
            } else {
                throw IoError("vh-map needs --hidden or --rbm");
            }
            write_or_print(vh_out, vh_map_to_csv(map));
        } else if (*patch) {
            VhCorrelationMap map;
            if (!pc_map.empty()) {
                map = parse_vh_map_csv(read_file(pc_map));
            } else if (pc_synth == "checkerboard") {
                map = synthetic_map(SyntheticKind::checkerboard, pc_L, pc_block, pc_seed);
            } else if (pc_synth == "white-noise") {
                map = synthetic_map(SyntheticKind::white_noise, pc_L, 0, pc_seed);
            } else {
                throw IoError("patch-corr needs --map or --synthetic");
            }
            CorrelationProfile prof = patch_two_point(map);
            std::string csv = profile_to_csv(prof);
            csv += "# spearman=" + fmt_double(spearman_rank_correlation(prof)) + "\n";
            write_or_print(pc_out, csv);
        } else if (*fit) {
            PowerLawFit res;
            if (!ft_profile.empty()) {
                CorrelationProfile prof = parse_profile_csv(read_file(ft_profile));
                double rmin = ft_rmin, rmax = ft_rmax;
                if (rmax == 0) {
                    if (ft_L == 0) throw FitError("give --r-min/--r-max or --L");
                    auto range = default_fit_range(prof, ft_L);
                    rmin = range.first;
                    rmax = range.second;
                }
                res = fit_power_law(prof, rmin, rmax);
            } else if (!ft_points.empty()) {
                CorrelationProfile pts = parse_profile_csv(read_file(ft_points));
                std::vector<std::pair<double, double>> xy;
                for (const auto& en : pts.entries) xy.push_back({en.r, en.value});
                res = fit_magnetization(xy, ft_Tc);
            } else {
                throw FitError("fit needs --profile or --points");
            }
            write_or_print(ft_out, fit_to_csv(res));
        } else if (*theory) {
            ExperimentConfig cfg;
            cfg.out_root = th_out;
            cfg.seed = th_seed;
            std::string manifest = run_experiment("theory-checks", cfg);
            std::printf("manifest %s\n", manifest.c_str());
        } else if (*list) {
            for (const auto& name : experiment_names()) std::printf("%s\n", name.c_str());
        } else if (*run) {
            ExperimentConfig cfg;
            cfg.out_root = ex_out;
            cfg.paper_scale = ex_paper;
            cfg.seed = ex_seed;
            std::string name = ex_name;
            if (std::filesystem::exists(ex_name) &&
                !std::filesystem::is_directory(ex_name)) {
                auto kv = parse_kv_file(ex_name);
                if (!kv.count("name")) throw IoError("experiment config needs name=...");
                name = kv["name"];
                kv.erase("name");
                if (kv.count("scale")) {
                    cfg.paper_scale = kv["scale"] == "paper";
                    kv.erase("scale");
                }
                if (kv.count("seed")) {
                    cfg.seed = std::stoull(kv["seed"]);
                    kv.erase("seed");
                }
                if (kv.count("out")) {
                    if (cfg.out_root.empty()) cfg.out_root = kv["out"];
                    kv.erase("out");
                }
                cfg.overrides = kv;
            }
            for (const auto& kv : ex_sets) {
                size_t eq = kv.find('=');
                if (eq == std::string::npos) throw IoError("--set needs key=value");
                cfg.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            std::string manifest = run_experiment(name, cfg);
            std::printf("manifest %s\n", manifest.c_str());
        } else if (*inspect) {
            Ensemble e = load_isng(in_path);
            std::printf("%s\n  L=%d  sites=%d  kind=%s  samples=%zu\n  T=%s  seed=%llu\n",
                        in_path.c_str(), e.side(), e.n_sites(),
                        e.kind() == Kind::binary ? "binary" : "real", e.size(),
                        fmt_double(e.temperature()).c_str(),
                        static_cast<unsigned long long>(e.seed()));
        } else if (*convert) {
            auto ends_with = [](const std::string& s, const std::string& suf) {
                return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
            };
            if (ends_with(cv_in, ".isng") && ends_with(cv_out, ".csv")) {
                atomic_write_file(cv_out, ensemble_to_csv(load_isng(cv_in)));
            } else if (ends_with(cv_in, ".csv") && ends_with(cv_out, ".isng")) {
                save_isng(ensemble_from_csv(read_file(cv_in)), cv_out);
            } else {
                throw IoError("convert handles .isng <-> .csv by extension");
            }
            std::printf("wrote %s\n", cv_out.c_str());
        }
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
