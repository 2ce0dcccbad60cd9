// reflect: single-image reflection suppression from the command line.
//
//   reflect suppress IN OUT [--mask M] [solver flags] [--trace T.jsonl]
//   reflect evaluate RESTORED TRUTH
//   reflect batch MANIFEST REPORT.csv [solver flags]
//   reflect synth --out-y Y.png --out-t T.png [--w 0.8 --sigma 3]
//
// Solver flags may also come from a config file (--config), e.g.
//   [suppress]
//   lambda = 0.002
// Command-line flags take precedence over the file.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "reflect/cli.hpp"

namespace {

using reflect::SolverParams;
namespace cli = reflect::cli;

struct SolverFlags {
    SolverParams params;
    double beta_min = 0.0;
    CLI::Option* beta_min_opt = nullptr;

    void attach(CLI::App* app) {
        app->add_option("--lambda", params.lambda, "prior weight (L0 edge penalty)")->capture_default_str()->check(CLI::NonNegativeNumber);
        app->add_option("--gamma", params.gamma, "weight of the plain L2 fidelity term")->capture_default_str()->check(CLI::NonNegativeNumber);
        beta_min_opt = app->add_option("--beta-min", beta_min, "first coupling weight beta (default: 2 * lambda)");
        app->add_option("--beta-max", params.beta_max, "last coupling weight beta")->capture_default_str();
        app->add_option("--kappa", params.kappa, "beta growth factor per outer iteration")->capture_default_str();
        app->add_option("--adam-step", params.adam_step, "ADAM step size")->capture_default_str();
        app->add_option("--adam-b1", params.adam_b1, "ADAM first-moment decay")->capture_default_str();
        app->add_option("--adam-b2", params.adam_b2, "ADAM second-moment decay")->capture_default_str();
        app->add_option("--adam-eps", params.adam_eps, "ADAM epsilon")->capture_default_str();
        app->add_option("--inner-iters", params.inner_iters, "maximum ADAM steps per outer iteration")->capture_default_str();
        app->add_option("--inner-tol", params.inner_rel_tol,
                        "stop the ADAM loop once the relative objective change falls below this")
            ->capture_default_str();
    }

    SolverParams resolve() {
        if (beta_min_opt->count() > 0) params.beta_min = beta_min;
        return params;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-image reflection suppression with a user-selected region prior"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value config file; [suppress]/[batch] sections hold solver flags");

    // suppress
    cli::SuppressArgs sup;
    SolverFlags sup_flags;
    auto* s = app.add_subcommand("suppress", "remove reflections from one image");
    s->add_option("input", sup.input, "input image (PNG or JPEG)")->required();
    s->add_option("output", sup.output, "restored PNG")->required();
    std::string sup_mask, sup_trace;
    auto* mask_opt = s->add_option("--mask", sup_mask, "region mask PNG: white = reflection (default: whole image)");
    s->add_option("--mask-policy", sup.mask_policy, "strict | nearest | strict-required")->capture_default_str();
    auto* trace_opt = s->add_option("--trace", sup_trace, "write one JSON line per outer iteration");
    s->add_option("--threads", sup.threads, "worker threads (0 = all cores; capped by REFLECT_THREADS)")->capture_default_str();
    sup_flags.attach(s);

    // evaluate
    cli::EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score a restored image against ground truth");
    e->add_option("restored", ev.restored, "restored image")->required();
    e->add_option("truth", ev.truth, "ground-truth image")->required();
    e->add_option("--dynamic-range", ev.dynamic_range, "L for the SSIM constants and PSNR peak")->capture_default_str();

    // batch
    cli::BatchArgs bat;
    SolverFlags bat_flags;
    auto* b = app.add_subcommand("batch", "restore and score every pair in a manifest");
    b->add_option("manifest", bat.manifest, "CSV rows: input,truth[,mask]")->required();
    b->add_option("report", bat.report, "CSV report path")->required();
    b->add_option("--mask-policy", bat.mask_policy, "strict | nearest | strict-required")->capture_default_str();
    b->add_flag("--no-solve", bat.no_solve, "score the input column directly");
    std::string bat_out;
    auto* out_dir_opt = b->add_option("--output-dir", bat_out, "also write restored images here");
    b->add_option("--threads", bat.threads, "pairs processed concurrently (0 = all cores)")->capture_default_str();
    bat_flags.attach(b);

    // synth
    cli::SynthArgs syn;
    auto* y = app.add_subcommand("synth", "compose a synthetic scene Y = w T + (1 - w) blur(R)");
    std::string syn_t, syn_r;
    auto* t_opt = y->add_option("--t", syn_t, "transmission image (default: generated)");
    auto* r_opt = y->add_option("--r", syn_r, "reflection image (default: generated blobs)");
    y->add_option("--out-y", syn.out_y, "composite output PNG")->required();
    y->add_option("--out-t", syn.out_t, "ground-truth output PNG")->required();
    y->add_option("--w", syn.scene.w, "transmission weight in [0,1]")->capture_default_str();
    y->add_option("--sigma", syn.scene.blur_sigma, "Gaussian blur std-dev of the reflection, pixels")->capture_default_str();
    y->add_option("--radius", syn.scene.kernel_radius, "kernel radius (0 = ceil(3 sigma))")->capture_default_str();
    y->add_option("--seed", syn.scene.seed, "generator seed")->capture_default_str();
    y->add_option("--height", syn.height, "generated height")->capture_default_str();
    y->add_option("--width", syn.width, "generated width")->capture_default_str();
    y->add_option("--channels", syn.channels, "generated channels (1 or 3)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return cli::kUsage;
    }

    if (s->parsed()) {
        if (mask_opt->count() > 0) sup.mask = sup_mask;
        if (trace_opt->count() > 0) sup.trace = sup_trace;
        sup.params = sup_flags.resolve();
        return cli::cmd_suppress(sup);
    }
    if (e->parsed()) return cli::cmd_evaluate(ev);
    if (b->parsed()) {
        if (out_dir_opt->count() > 0) bat.output_dir = bat_out;
        bat.params = bat_flags.resolve();
        return cli::cmd_batch(bat);
    }
    if (y->parsed()) {
        if (t_opt->count() > 0) syn.t_input = syn_t;
        if (r_opt->count() > 0) syn.r_input = syn_r;
        return cli::cmd_synth(syn);
    }
    return cli::kUsage;
}
