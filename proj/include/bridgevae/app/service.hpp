#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "bridgevae/app/session.hpp"

namespace httplib {
class Server;
}

namespace bvae::app {

struct ServiceConfig {
    std::filesystem::path checkpoint;
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::optional<std::filesystem::path> centroids;
    std::size_t max_body_bytes = 4u << 20;
    std::size_t max_morph_steps = 101;
};

/// HTTP front end over an immutable Session.
///
///   GET  /meta       {latent_dim, image_width, image_height, label_dictionary, checkpoint_id}
///   POST /decode     {"z": [...]}                 -> image/png
///   POST /encode     PNG body                     -> {"z_mean": [...], "z_log_var": [...]}
///   GET  /centroids  {name: [...]}                (404 without a centroid table)
///   POST /morph      {"a": z|name, "b": z|name, "steps": n} -> image/png strip
///
/// Errors are JSON {"error": message, "field": name?} with 400/404/413.
class InferenceService {
public:
    explicit InferenceService(ServiceConfig config);
    ~InferenceService();
    InferenceService(const InferenceService&) = delete;
    InferenceService& operator=(const InferenceService&) = delete;

    /// Binds the socket; returns the bound port.
    int bind();
    /// Serves until stop(); call bind() first.
    void run();
    void stop();
    bool running() const;

    const Session& session() const { return *session_; }

private:
    void install_routes();

    ServiceConfig config_;
    std::shared_ptr<const Session> session_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace bvae::app
