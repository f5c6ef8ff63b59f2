#include "openphase/sweep.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace openphase;

namespace {

int emit(const SweepTable& t, const RunConfig& c, const std::string& name, const std::string& kind) {
    const std::string path = write_outputs(t, c.outDir, name, kind);
    std::cout << path << " (" << t.rows.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric phases of the dissipative three-level STIRAP system"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string figureId, outDir = "out";
    unsigned threads = 0;
    auto* fig = app.add_subcommand("figure", "reproduce one of the named figure sweeps");
    fig->add_option("--id", figureId, "figure id")->required()->check(CLI::IsMember(figure_ids()));
    fig->add_option("--out", outDir, "output directory");
    fig->add_option("--threads", threads, "worker threads (0 = hardware)");

    std::string configPath;
    auto* sweep = app.add_subcommand("sweep", "run the schedule of a config file");
    sweep->add_option("--config", configPath, "config file")->required()->check(CLI::ExistingFile);

    std::string matrixPath;
    JordanOptions jopt;
    auto* jordan = app.add_subcommand("jordan", "Jordan decomposition of a matrix file");
    jordan->add_option("--matrix", matrixPath, "matrix file")->required()->check(CLI::ExistingFile);
    jordan->add_option("--cluster-tol", jopt.clusterTol, "absolute eigenvalue clustering tolerance");
    jordan->add_option("--rank-tol", jopt.rankTol, "relative rank tolerance");

    int level = 1;
    auto* prop = app.add_subcommand("propagate", "populations against time for one parameter point");
    prop->add_option("--config", configPath, "config file")->required()->check(CLI::ExistingFile);
    prop->add_option("--initial-level", level, "initially populated level")->required()->check(CLI::Range(1, 3));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fig) {
            RunConfig c;
            c.outDir = outDir;
            c.threads = threads;
            apply_figure(c, figureId);
            return emit(run_config(c, "figure --id " + figureId), c, figureId, figureId);
        }
        if (*sweep) {
            const RunConfig c = parse_config_file(configPath);
            return emit(run_config(c, "sweep"), c, c.name, c.figure);
        }
        if (*jordan) {
            std::cout << jordan_report(read_matrix_file(matrixPath), jopt);
            return 0;
        }
        if (*prop) {
            const RunConfig c = parse_config_file(configPath);
            return emit(run_propagate(c, level), c, c.name + "-propagate", "propagate");
        }
    } catch (const IllConditionedTransform& e) {
        std::cerr << "ill-conditioned transform: " << e.what() << '\n';
        return 3;
    } catch (const ConfigParse& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "matrix file error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
