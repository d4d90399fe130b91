#include "bridgevae/app/service.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bridgevae/data/bridge.hpp"
#include "bridgevae/data/dataset.hpp"

namespace bvae::app {

namespace {

using nlohmann::json;

struct RequestError {
    int status;
    std::string message;
    std::string field;
};

void send_error(httplib::Response& res, const RequestError& e) {
    json body{{"error", e.message}};
    if (!e.field.empty()) body["field"] = e.field;
    res.status = e.status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw RequestError{400, "request body is not valid JSON", ""};
    }
}

lab::LatentVec parse_z(const json& value, const std::string& field, std::size_t latent_dim) {
    if (!value.is_array()) throw RequestError{400, field + " must be an array of numbers", field};
    if (value.size() != latent_dim) {
        throw RequestError{400,
                           field + " has " + std::to_string(value.size()) + " coordinates, expected " +
                               std::to_string(latent_dim),
                           field};
    }
    lab::LatentVec z;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) throw RequestError{400, field + "[" + std::to_string(i) + "] is not a number", field};
        const double v = value[i].get<double>();
        if (!std::isfinite(v)) throw RequestError{400, field + "[" + std::to_string(i) + "] is not finite", field};
        z.push_back(v);
    }
    return z;
}

// A morph endpoint is either a coordinate array or a subtype name.
lab::LatentVec parse_endpoint(const Session& s, const json& body, const std::string& field) {
    if (!body.contains(field)) throw RequestError{400, "missing field " + field, field};
    const auto& v = body[field];
    if (v.is_string()) {
        if (!s.centroids) throw RequestError{404, "no centroid table loaded", field};
        try {
            return s.centroid(v.get<std::string>());
        } catch (const Error& e) {
            throw RequestError{400, e.what(), field};
        }
    }
    return parse_z(v, field, s.profile.latent_dim);
}

template <typename Handler>
httplib::Server::Handler guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const RequestError& e) {
            send_error(res, e);
        } catch (const ShapeError& e) {
            send_error(res, {400, e.what(), ""});
        } catch (const IoError& e) {
            send_error(res, {400, e.what(), ""});
        } catch (const InvalidArgument& e) {
            send_error(res, {400, e.what(), ""});
        } catch (const std::exception& e) {
            send_error(res, {500, e.what(), ""});
        }
    };
}

}  // namespace

InferenceService::InferenceService(ServiceConfig config)
    : config_(std::move(config)),
      session_(std::make_shared<const Session>(Session::load(config_.checkpoint, config_.centroids))),
      server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(config_.max_body_bytes);
    install_routes();
}

InferenceService::~InferenceService() { stop(); }

void InferenceService::install_routes() {
    const auto session = session_;
    const std::size_t max_steps = config_.max_morph_steps;

    server_->Get("/meta", guarded([session](const httplib::Request&, httplib::Response& res) {
        const json body{{"latent_dim", session->profile.latent_dim},
                        {"image_width", session->profile.width},
                        {"image_height", session->profile.height},
                        {"label_dictionary", data::label_dictionary()},
                        {"checkpoint_id", session->checkpoint_id}};
        res.set_content(body.dump(), "application/json");
    }));

    server_->Post("/decode", guarded([session](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("z")) throw RequestError{400, "missing field z", "z"};
        const auto z = parse_z(body["z"], "z", session->profile.latent_dim);
        res.set_content(decode_to_png(session->model, z), "image/png");
    }));

    server_->Post("/encode", guarded([session](const httplib::Request& req, httplib::Response& res) {
        data::Image image;
        try {
            image = data::decode_png(req.body);
        } catch (const Error& e) {
            throw RequestError{400, std::string("body is not a PNG image: ") + e.what(), ""};
        }
        const data::Image fitted = fit_to_profile(image, session->profile);
        const auto out = session->model.encode(data::stack_images({fitted}));
        json body{{"z_mean", std::vector<double>(out.mean.values().begin(), out.mean.values().end())},
                  {"z_log_var", std::vector<double>(out.log_var.values().begin(), out.log_var.values().end())}};
        res.set_content(body.dump(), "application/json");
    }));

    server_->Get("/centroids", guarded([session](const httplib::Request&, httplib::Response& res) {
        if (!session->centroids) throw RequestError{404, "no centroid table loaded", ""};
        res.set_content(json(session->centroids->labels).dump(), "application/json");
    }));

    server_->Post("/morph", guarded([session, max_steps](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object()) throw RequestError{400, "request body must be a JSON object", ""};
        const auto a = parse_endpoint(*session, body, "a");
        const auto b = parse_endpoint(*session, body, "b");
        std::size_t steps = lab::kDefaultMorphSteps;
        if (body.contains("steps")) {
            if (!body["steps"].is_number_integer()) throw RequestError{400, "steps must be an integer", "steps"};
            const auto v = body["steps"].get<long long>();
            if (v < 2 || static_cast<std::size_t>(v) > max_steps) {
                throw RequestError{400, "steps must lie in [2, " + std::to_string(max_steps) + "]", "steps"};
            }
            steps = static_cast<std::size_t>(v);
        }
        const auto track = lab::morph(session->model, a, b, steps);
        res.set_content(data::encode_png(lab::montage(track.frames, 1, steps)), "image/png");
    }));
}

int InferenceService::bind() {
    if (config_.port == 0) {
        const int port = server_->bind_to_any_port(config_.host);
        if (port < 0) throw IoError("cannot bind " + config_.host + " to any port");
        return port;
    }
    if (!server_->bind_to_port(config_.host, config_.port)) {
        throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    return config_.port;
}

void InferenceService::run() { server_->listen_after_bind(); }

void InferenceService::stop() {
    if (server_) server_->stop();
}

bool InferenceService::running() const { return server_->is_running(); }

}  // namespace bvae::app
