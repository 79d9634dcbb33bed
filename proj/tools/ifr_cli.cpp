/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: tools/ifr_cli.cpp
 *
 * Copyright 2026 The ifr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ifr/apps.hpp"
#include "ifr/eval.hpp"
#include "ifr/io.hpp"
#include "ifr/solver.hpp"
#include "ifr/synthgen.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ifr;

namespace {

class CommandError : public Error
{
public:
    CommandError(const std::string& what, json detail = json::object()) : Error(what), detail(std::move(detail)) {}
    json detail;
};

std::string identity_dir_name(int k)
{
    std::ostringstream ss;
    ss << "id_" << std::setw(4) << std::setfill('0') << k;
    return ss.str();
}

std::string frame_file(int frame, const std::string& suffix)
{
    std::ostringstream ss;
    ss << "frame_" << std::setw(3) << std::setfill('0') << frame << suffix;
    return ss.str();
}

int thread_count()
{
    const char* env = std::getenv("IFR_THREADS");
    if (!env || !*env)
        return 1;
    try {
        const int n = std::stoi(env);
        if (n >= 1)
            return n;
    } catch (const std::exception&) {
    }
    throw CommandError("IFR_THREADS must be a positive integer");
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw CommandError("cannot create output directory " + dir.string());
}

struct GenArgs
{
    std::uint64_t seed = 0;
    int identities = 1;
    int frames = 4;
    int size = 64;
    std::string out;
};

void cmd_gen(const GenArgs& a)
{
    if (a.frames < 2)
        throw CommandError("--frames must be at least 2");
    if (a.identities < 1)
        throw CommandError("--identities must be at least 1");
    if (a.size < 16)
        throw CommandError("--size must be at least 16");
    ensure_directory(a.out);
    synth::SequenceOptions options;
    options.width = options.height = a.size;
    for (int k = 0; k < a.identities; ++k) {
        const FrameSequence seq = synth::gen_sequence(synth::derive_seed(a.seed, 0x6964, k), a.frames, options);
        io::write_sequence(fs::path(a.out) / identity_dir_name(k), seq);
    }
}

struct DecomposeArgs
{
    std::string manifest;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<int> iterations;
};

void cmd_decompose(const DecomposeArgs& a)
{
    SolverConfig cfg;
    if (!a.config.empty()) {
        if (!fs::exists(a.config))
            throw CommandError("config not found: " + a.config);
        json j;
        try {
            j = json::parse(io::read_file(a.config));
        } catch (const json::exception& e) {
            throw CommandError(a.config + ": malformed config: " + e.what());
        }
        cfg = config_from_json(j, cfg);
    }
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.lr)
        cfg.lr = *a.lr;
    if (a.iterations)
        for (auto& s : cfg.stages)
            s.iterations = *a.iterations;
    cfg.threads = thread_count();
    cfg.validate();

    const FrameSequence seq = io::read_sequence(a.manifest);

    SolveResult result;
    try {
        result = solve(seq, cfg);
    } catch (const SolverAbort& e) {
        json report = {{"stage", e.report.stage}, {"iteration", e.report.iteration}, {"terms", e.report.terms}};
        throw CommandError(e.what(), {{"report", report}});
    }
    std::vector<Decomposition> fixed;
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
        fixed.push_back(gauge_fix(result.decompositions[i], seq.frames[i].mask));

    ensure_directory(a.out);
    const fs::path out(a.out);
    for (std::size_t i = 0; i < fixed.size(); ++i)
        io::write_decomposition(out, static_cast<int>(i), fixed[i], seq.frames[i].mask);

    std::ostringstream csv;
    csv << std::setprecision(17) << "iteration,term,value\n";
    for (const auto& r : result.reports) {
        for (const auto& [name, value] : r.terms)
            csv << r.iteration << ',' << name << ',' << value << '\n';
        csv << r.iteration << ",total," << r.total << '\n';
    }
    io::write_file_atomic(out / "energy_trace.csv", csv.str());
    json cfg_json = config_to_json(cfg);
    cfg_json.erase("threads");
    io::write_file_atomic(out / "config.json", cfg_json.dump(2) + "\n");
}

std::vector<fs::path> decomposition_indices(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw CommandError("prediction directory not found: " + dir.string());
    const std::regex pattern(R"(frame_\d{3}_decomp\.json)");
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && std::regex_match(e.path().filename().string(), pattern))
            found.push_back(e.path());
    std::sort(found.begin(), found.end());
    return found;
}

struct EvalArgs
{
    std::string pred_dir;
    std::string manifest;
    std::string out;
};

void cmd_eval(const EvalArgs& a)
{
    const FrameSequence seq = io::read_sequence(a.manifest);
    const auto indices = decomposition_indices(a.pred_dir);
    if (indices.empty())
        throw CommandError("no decompositions found in " + a.pred_dir);
    if (indices.size() != seq.frames.size())
        throw CommandError("prediction directory holds " + std::to_string(indices.size()) +
                           " frames, manifest lists " + std::to_string(seq.frames.size()));

    json frames = json::array();
    std::vector<NormalErrorStats> normal_stats;
    double w_total = 0.0, recon_l1 = 0.0, recon_se = 0.0, albedo = 0.0;
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const auto& f = seq.frames[i];
        if (!f.ground_truth)
            throw CommandError("manifest frame " + std::to_string(i) + " has no ground truth");
        const fs::path index = fs::path(a.pred_dir) / frame_file(static_cast<int>(i), "_decomp.json");
        const auto loaded = io::read_decomposition(index);
        const Decomposition& d = loaded.decomposition;
        check_same_size(d.albedo, f.mask);

        const NormalErrorStats ns = angular_stats(d.normal, f.ground_truth->normal, f.mask);
        const ReconMetrics rm = recon_metrics(reconstruction(d, f.mask), f.image_global, f.mask);
        const double ae = albedo_error_scale_invariant(d.albedo, f.ground_truth->albedo, f.mask);
        normal_stats.push_back(ns);
        const double w = static_cast<double>(ns.count);
        w_total += w;
        recon_l1 += w * rm.l1;
        recon_se += w * (std::isinf(rm.psnr_db) ? 0.0 : std::pow(10.0, -rm.psnr_db / 10.0));
        albedo += w * ae;
        frames.push_back({{"frame", i}, {"normal", to_json(ns)}, {"reconstruction", to_json(rm)},
                          {"albedo_scale_invariant_l1", ae}});
    }
    const double mse = recon_se / w_total;
    const ReconMetrics pooled{recon_l1 / w_total,
                              mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity()};
    const json report = {{"identity", seq.identity},
                         {"frames", frames},
                         {"aggregate",
                          {{"normal", to_json(pool(normal_stats))},
                           {"reconstruction", to_json(pooled)},
                           {"albedo_scale_invariant_l1", albedo / w_total}}}};
    const fs::path out(a.out);
    if (out.has_parent_path())
        ensure_directory(out.parent_path());
    io::write_file_atomic(out, report.dump(2) + "\n");
}

fs::path resolve_index(const std::string& decomp, int frame)
{
    const fs::path p(decomp);
    if (fs::is_directory(p))
        return p / frame_file(frame, "_decomp.json");
    return p;
}

struct RelightArgs
{
    std::string decomp;
    int frame = 0;
    std::string target;
    std::string out;
    bool keep_residual = false;
};

void write_output_image(const fs::path& out, const Image& img)
{
    if (out.has_parent_path())
        ensure_directory(out.parent_path());
    io::write_image(out, img);
}

void cmd_relight(const RelightArgs& a)
{
    const auto loaded = io::read_decomposition(resolve_index(a.decomp, a.frame));
    const ShLighting target = io::read_lighting(a.target);
    write_output_image(a.out, relight(loaded.decomposition, loaded.mask, target, a.keep_residual));
}

struct EditArgs
{
    std::string decomp;
    int frame = 0;
    std::string image;
    std::string mask;
    std::string out;
};

void cmd_edit_albedo(const EditArgs& a)
{
    const auto loaded = io::read_decomposition(resolve_index(a.decomp, a.frame));
    const Image edit = io::read_image(a.image);
    const Mask edit_mask = io::read_mask(a.mask);
    write_output_image(a.out, edit_albedo(loaded.decomposition, loaded.mask, edit, edit_mask));
}

int fail(const std::string& command, const std::string& message, const json& detail = json::object())
{
    json line = {{"error", message}, {"command", command}};
    for (const auto& [k, v] : detail.items())
        line[k] = v;
    std::cerr << line.dump() << std::endl;
    return 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Inverse face rendering by energy minimization"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* sc_gen = app.add_subcommand("gen", "Generate synthetic sequences with ground truth");
    sc_gen->add_option("--seed", gen.seed, "Random seed");
    sc_gen->add_option("--identities", gen.identities, "Number of identities");
    sc_gen->add_option("--frames", gen.frames, "Frames per identity");
    sc_gen->add_option("--size", gen.size, "Raster width and height");
    sc_gen->add_option("--out", gen.out, "Output directory")->required();

    DecomposeArgs dec;
    auto* sc_dec = app.add_subcommand("decompose", "Decompose a sequence into albedo, normals, lighting, residual");
    sc_dec->add_option("--manifest", dec.manifest, "Sequence manifest")->required();
    sc_dec->add_option("--config", dec.config, "Solver config JSON");
    sc_dec->add_option("--out", dec.out, "Output directory")->required();
    sc_dec->add_option("--seed", dec.seed, "Seed override");
    sc_dec->add_option("--lr", dec.lr, "Learning-rate override");
    sc_dec->add_option("--iterations", dec.iterations, "Iterations per stage override");

    EvalArgs ev;
    auto* sc_eval = app.add_subcommand("eval", "Score decompositions against ground truth");
    sc_eval->add_option("--pred-dir", ev.pred_dir, "Directory written by decompose")->required();
    sc_eval->add_option("--manifest", ev.manifest, "Sequence manifest with ground truth")->required();
    sc_eval->add_option("--out", ev.out, "Metrics JSON path")->required();

    RelightArgs rl;
    auto* sc_rl = app.add_subcommand("relight", "Re-render a decomposition under new lighting");
    sc_rl->add_option("--decomp", rl.decomp, "Decomposition index JSON or directory")->required();
    sc_rl->add_option("--frame", rl.frame, "Frame when --decomp is a directory");
    sc_rl->add_option("--target-lighting", rl.target, "SH lighting JSON")->required();
    sc_rl->add_option("--out", rl.out, "Output PNG")->required();
    sc_rl->add_flag("--keep-residual", rl.keep_residual, "Keep the original residual");

    EditArgs ed;
    auto* sc_ed = app.add_subcommand("edit-albedo", "Replace albedo inside a mask and re-render");
    sc_ed->add_option("--decomp", ed.decomp, "Decomposition index JSON or directory")->required();
    sc_ed->add_option("--frame", ed.frame, "Frame when --decomp is a directory");
    sc_ed->add_option("--edit-image", ed.image, "Replacement albedo PNG")->required();
    sc_ed->add_option("--edit-mask", ed.mask, "Edit mask PNG")->required();
    sc_ed->add_option("--out", ed.out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("parse", e.what());
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*sc_gen)
            cmd_gen(gen);
        else if (*sc_dec)
            cmd_decompose(dec);
        else if (*sc_eval)
            cmd_eval(ev);
        else if (*sc_rl)
            cmd_relight(rl);
        else if (*sc_ed)
            cmd_edit_albedo(ed);
    } catch (const CommandError& e) {
        return fail(command, e.what(), e.detail);
    } catch (const std::exception& e) {
        return fail(command, e.what());
    }
    return 0;
}
