#pragma once

#include <functional>
#include <map>
#include <string>

// Eigen must be seen before httplib, whose resolver headers define a `_res` macro.
#include "ebrt/service/service.hpp"

#include <httplib.h>
#include <json.hpp>

// HTTP routes over Service. JSON in and out; errors come back as {"error": message} with the
// status from http_status().

namespace ebrt::service {

namespace detail {

inline void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("request body is not valid JSON: ") + e.what());
  }
}

inline std::map<std::string, std::string> query(const httplib::Request& req) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : req.params) out[k] = v;
  return out;
}

/// Runs `f`, turning library errors into JSON error responses.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    send_json(res, {{"error", e.what()}}, 422);
  } catch (const std::exception& e) {
    send_json(res, {{"error", e.what()}}, http_status(e));
  }
}

}  // namespace detail

inline void register_routes(httplib::Server& server, Service& svc) {
  using detail::guarded;
  using detail::send_json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  server.Get("/machines", [&](const Req&, Res& res) { guarded(res, [&] { send_json(res, svc.list_machines()); }); });
  server.Get("/machines/:machine/meshes/:component", [&](const Req& req, Res& res) {
    guarded(res, [&] {
      res.set_content(svc.component_mesh(req.path_params.at("machine"), req.path_params.at("component")),
                      "model/stl");
    });
  });
  server.Get("/phantoms/:phantom/mesh", [&](const Req& req, Res& res) {
    guarded(res, [&] { res.set_content(svc.phantom_mesh(req.path_params.at("phantom")), "model/stl"); });
  });

  server.Post("/sessions", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.create_session(detail::parse_body(req)), 201); });
  });
  server.Delete("/sessions/:id", [&](const Req& req, Res& res) {
    guarded(res, [&] {
      svc.delete_session(req.path_params.at("id"));
      res.status = 204;
    });
  });
  server.Get("/sessions/:id/state", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.get_state(req.path_params.at("id"))); });
  });
  server.Put("/sessions/:id/state", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.put_state(req.path_params.at("id"), detail::parse_body(req))); });
  });
  server.Post("/sessions/:id/attachments", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.add_attachment(req.path_params.at("id"), detail::parse_body(req))); });
  });
  server.Delete("/sessions/:id/attachments/:attachment", [&](const Req& req, Res& res) {
    guarded(res, [&] {
      send_json(res, svc.remove_attachment(req.path_params.at("id"), req.path_params.at("attachment")));
    });
  });
  server.Post("/sessions/:id/patient", [&](const Req& req, Res& res) {
    guarded(res, [&] {
      std::vector<UploadedFile> files;
      auto params = detail::query(req);
      if (req.is_multipart_form_data()) {
        for (const auto& [field, part] : req.files) {
          // Plain form fields (no file name) act as parameters.
          if (part.filename.empty() && (field == "iso" || field == "decimate" || field == "phantom"))
            params[field] = part.content;
          else
            files.push_back({field, part.filename, part.content});
        }
      } else if (!req.body.empty()) {
        const auto body = detail::parse_body(req);
        if (body.contains("phantom") && body.at("phantom").is_string())
          params["phantom"] = body.at("phantom").get<std::string>();
      }
      send_json(res, svc.set_patient(req.path_params.at("id"), files, params), 201);
    });
  });
  server.Delete("/sessions/:id/patient", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.clear_patient(req.path_params.at("id"))); });
  });
  server.Get("/sessions/:id/patient/mesh", [&](const Req& req, Res& res) {
    guarded(res, [&] { res.set_content(svc.patient_mesh(req.path_params.at("id")), "model/stl"); });
  });
  server.Get("/sessions/:id/collision", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.collision(req.path_params.at("id"))); });
  });
  server.Put("/sessions/:id/probes", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.put_probes(req.path_params.at("id"), detail::parse_body(req))); });
  });
  server.Get("/sessions/:id/measure", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.measure(req.path_params.at("id"), detail::query(req))); });
  });
  server.Post("/sessions/:id/scenario", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.save_scenario(req.path_params.at("id"), detail::parse_body(req)), 201); });
  });
  server.Get("/scenarios", [&](const Req&, Res& res) { guarded(res, [&] { send_json(res, svc.list_scenarios()); }); });
  server.Post("/scenarios/:file/run", [&](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, svc.run_scenario(req.path_params.at("file"))); });
  });

  server.set_payload_max_length(svc.config().max_upload_bytes + (1u << 20));
  // A browser front-end may be served from another origin during development.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(.*)", [](const Req&, Res& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

}  // namespace ebrt::service
