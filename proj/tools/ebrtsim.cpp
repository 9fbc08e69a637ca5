// ebrtsim: command-line front end to the simulator library.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "ebrt/ct/pipeline.hpp"
#include "ebrt/geometry/mesh_topology.hpp"
#include "ebrt/linac/builtin.hpp"
#include "ebrt/measure/scenario.hpp"
#include "ebrt/service/http.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ebrt;

namespace {

// Exit codes: 0 ok, 1 deviation or collision check failed, 2 usage or input error.
constexpr int kExitDeviation = 1;
constexpr int kExitError = 2;

std::shared_ptr<const linac::Catalog> open_catalog(const std::string& dir) {
  if (!dir.empty()) return linac::load_catalog(dir);
  if (const char* env = std::getenv("EBRT_MACHINES"); env && *env) return linac::load_catalog(env);
  return linac::builtin_catalog();
}

std::string distance_text(double d) {
  if (!std::isfinite(d)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", d);
  return buf;
}

void print_result(const measure::ScenarioResult& r) {
  std::cout << r.name << ": " << (r.colliding() ? "COLLISION" : "clear") << "\n";
  for (const auto& x : r.reports)
    std::cout << "  " << x.source << " / " << x.target << "  " << (x.colliding ? "colliding" : "clear") << "  "
              << distance_text(x.distance_mm) << " mm\n";
  for (const auto& x : r.beam_couch)
    std::cout << "  beam / " << x.target << "  " << (x.colliding ? "intersects" : "clear") << "\n";
  for (const auto& p : r.readings) std::cout << "  probe " << p.id << "  " << distance_text(p.distance_mm) << " mm\n";
  if (r.checked) {
    for (const auto& d : r.deviations) std::cout << "  DEVIATION " << d.what << ": " << d.message << "\n";
    std::cout << "  " << (r.passed() ? "matches expected" : "does not match expected") << "\n";
  }
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"External-beam treatment room simulator"};
  app.require_subcommand(1);
  // Parent options may also follow the subcommand ("serve --port 8080 --machines dir").
  app.fallthrough();
  std::string machines_dir;
  app.add_option("--machines", machines_dir, "Machine description directory (default: built-in, or EBRT_MACHINES)");

  // machines
  auto* machines = app.add_subcommand("machines", "Inspect or export machine descriptions");
  machines->require_subcommand(1);
  auto* machines_list = machines->add_subcommand("list", "List machines, attachments and phantoms");
  bool list_json = false;
  machines_list->add_flag("--json", list_json, "Print JSON");
  auto* machines_export = machines->add_subcommand("export", "Write the built-in descriptions as JSON files");
  std::string export_dir;
  machines_export->add_option("dir", export_dir)->required();

  // ct
  auto* ct_cmd = app.add_subcommand("ct", "CT slice stacks and surface reconstruction");
  ct_cmd->require_subcommand(1);
  auto* ct_rec = ct_cmd->add_subcommand("reconstruct", "Extract and optionally decimate the skin surface");
  std::string stack_dir, out_path;
  double iso = ct::kDefaultSkinIso;
  std::size_t target = 0;
  bool all_components = false, rec_json = false;
  ct_rec->add_option("stack", stack_dir, "Directory with meta.json and slice_<i>.raw")->required();
  ct_rec->add_option("--iso", iso, "Iso value in stored units after rescale")->capture_default_str();
  ct_rec->add_option("--decimate", target, "Target triangle count (0 keeps the full mesh)");
  ct_rec->add_option("-o,--output", out_path, "Write the surface (.stl or .obj)");
  ct_rec->add_flag("--all-components", all_components, "Keep every connected component");
  ct_rec->add_flag("--json", rec_json, "Print JSON");

  auto* ct_phantom = ct_cmd->add_subcommand("phantom", "Write a synthetic sphere slice stack");
  std::string phantom_dir;
  int size = 64;
  double pixel = 2.0, spacing = 2.5, radius = 50.0, edge = 6.0;
  ct_phantom->add_option("dir", phantom_dir)->required();
  ct_phantom->add_option("--size", size, "Rows, columns and slices")->capture_default_str()->check(CLI::Range(4, 1024));
  ct_phantom->add_option("--pixel", pixel, "Pixel size, mm")->capture_default_str()->check(CLI::PositiveNumber);
  ct_phantom->add_option("--spacing", spacing, "Slice spacing, mm")->capture_default_str()->check(CLI::PositiveNumber);
  ct_phantom->add_option("--radius", radius, "Sphere radius, mm")->capture_default_str()->check(CLI::PositiveNumber);
  ct_phantom->add_option("--edge", edge, "Width of the soft edge, mm")->capture_default_str()->check(CLI::PositiveNumber);

  // scenario
  auto* sc = app.add_subcommand("scenario", "Run, freeze or batch-check scenario files");
  sc->require_subcommand(1);
  double tol = measure::kDistanceTolerance;
  sc->add_option("--tolerance", tol, "Distance tolerance, mm")->capture_default_str();
  auto* sc_run = sc->add_subcommand("run", "Run one scenario");
  std::string scenario_file;
  bool run_json = false;
  sc_run->add_option("file", scenario_file)->required()->check(CLI::ExistingFile);
  sc_run->add_flag("--json", run_json, "Print JSON");
  auto* sc_freeze = sc->add_subcommand("freeze", "Run a scenario and record the results as its expected block");
  std::string freeze_out;
  sc_freeze->add_option("file", scenario_file)->required()->check(CLI::ExistingFile);
  sc_freeze->add_option("-o,--output", freeze_out, "Output file (default: overwrite the input)");
  auto* sc_suite = sc->add_subcommand("suite", "Run every scenario in a directory");
  std::string suite_dir;
  sc_suite->add_option("dir", suite_dir)->required()->check(CLI::ExistingDirectory);

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP API");
  std::string host = "0.0.0.0", scenarios_dir;
  int port = 8080;
  if (const char* env = std::getenv("EBRT_PORT"); env && *env) port = std::atoi(env);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "Port (default 8080, or EBRT_PORT)")->capture_default_str()->check(
      CLI::Range(0, 65535));
  serve->add_option("--scenarios", scenarios_dir, "Scenario directory (default: scenarios, or EBRT_SCENARIOS)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (machines_export->parsed()) {
      linac::export_builtin(export_dir);
      std::cout << "wrote machine descriptions to " << export_dir << "\n";
      return 0;
    }
    if (machines_list->parsed()) {
      service::ServiceConfig cfg;
      cfg.catalog = open_catalog(machines_dir);
      const auto j = service::Service(cfg).list_machines();
      if (list_json) {
        std::cout << j.dump(2) << "\n";
        return 0;
      }
      for (const auto& m : j["machines"]) {
        std::cout << m["id"].get<std::string>() << "  " << m["name"].get<std::string>() << "\n";
        for (const auto& a : m["attachments"])
          std::cout << "  attachment " << a["id"].get<std::string>() << " (" << a["mount"].get<std::string>()
                    << ")\n";
      }
      for (const auto& p : j["phantoms"]) std::cout << "phantom " << p["id"].get<std::string>() << "\n";
      return 0;
    }
    if (ct_phantom->parsed()) {
      ct::SliceStackMeta meta;
      meta.rows = meta.cols = meta.slices = size;
      meta.pixel_size_mm = pixel;
      meta.slice_spacing_mm = spacing;
      meta.intercept = -1000.0;
      meta.origin_mm = {-pixel * (size - 1) / 2, -pixel * (size - 1) / 2, -spacing * (size - 1) / 2};
      ct::write_slice_stack(phantom_dir, meta, ct::sphere_phantom(meta, {0, 0, 0}, radius, edge));
      std::cout << "wrote " << size << " slices to " << phantom_dir << "\n";
      return 0;
    }
    if (ct_rec->parsed()) {
      ct::ReconstructOptions opt;
      opt.iso = iso;
      opt.largest_component = !all_components;
      if (target > 0) opt.target_triangles = target;
      const auto m = ct::reconstruct(fs::path(stack_dir), opt);
      if (m.status != ct::IsoStatus::Ok) {
        std::cerr << "warning: " << m.warning << "\n";
        return kExitError;
      }
      if (!out_path.empty()) ct::export_mesh(m, out_path);
      const json j{{"source", m.source_id},
                   {"iso", m.iso},
                   {"triangles", m.mesh.triangle_count()},
                   {"vertices", m.mesh.vertex_count()},
                   {"decimation_ratio", m.decimation_ratio},
                   {"volume_mm3", geom::signed_volume(m.mesh)},
                   {"area_mm2", geom::surface_area(m.mesh)},
                   {"watertight", geom::is_watertight(m.mesh)}};
      if (rec_json) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << "triangles " << j["triangles"] << "\nvolume_mm3 " << distance_text(j["volume_mm3"])
                  << "\narea_mm2 " << distance_text(j["area_mm2"]) << "\nwatertight " << j["watertight"] << "\n";
        if (!out_path.empty()) std::cout << "wrote " << out_path << "\n";
      }
      return 0;
    }
    if (sc_run->parsed()) {
      const auto catalog = open_catalog(machines_dir);
      const fs::path file = scenario_file;
      const auto r = measure::run_scenario(measure::load_scenario(file), *catalog, file.parent_path(), tol);
      if (run_json)
        std::cout << measure::to_json(r).dump(2) << "\n";
      else
        print_result(r);
      return r.passed() ? 0 : kExitDeviation;
    }
    if (sc_freeze->parsed()) {
      const auto catalog = open_catalog(machines_dir);
      const fs::path file = scenario_file;
      const auto s = measure::load_scenario(file);
      const auto r = measure::run_scenario(s, *catalog, file.parent_path(), tol);
      const fs::path out = freeze_out.empty() ? file : fs::path(freeze_out);
      measure::save_scenario(measure::freeze(s, r), out);
      std::cout << "froze " << s.name << " (" << (r.colliding() ? "collision" : "clear") << ") to " << out.string()
                << "\n";
      return 0;
    }
    if (sc_suite->parsed()) {
      const auto catalog = open_catalog(machines_dir);
      const auto entries = measure::run_suite(suite_dir, *catalog, tol);
      std::size_t ok = 0;
      for (const auto& e : entries) {
        const bool pass = e.error.empty() && e.result.passed();
        ok += pass;
        std::cout << (pass ? "PASS " : "FAIL ") << e.file.filename().string();
        if (!e.error.empty()) std::cout << "  " << e.error;
        for (const auto& d : e.result.deviations) std::cout << "\n  " << d.what << ": " << d.message;
        std::cout << "\n";
      }
      std::cout << ok << "/" << entries.size() << " scenarios match\n";
      return measure::suite_passed(entries) ? 0 : kExitDeviation;
    }
    if (serve->parsed()) {
      auto cfg = service::ServiceConfig::from_environment();
      if (!machines_dir.empty()) cfg.catalog = linac::load_catalog(machines_dir);
      if (!scenarios_dir.empty()) cfg.scenario_dir = scenarios_dir;
      service::Service svc(cfg);
      httplib::Server server;
      service::register_routes(server, svc);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return kExitError;
      }
      std::cout << "listening on " << host << ":" << port << std::endl;
      server.listen_after_bind();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
