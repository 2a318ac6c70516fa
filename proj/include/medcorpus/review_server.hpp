#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "medcorpus/review.hpp"

namespace httplib {
class Server;
}

namespace medcorpus {

/// JSON API over a ReviewService:
///   GET  /datasets
///   GET  /datasets/{name}/batch?cursor=&size=
///   GET  /images/{record_id}
///   POST /labels                 (reviewer from body or X-Reviewer header)
///   GET  /datasets/{name}/decision
/// Errors are {"error": <code name>, "detail": ...} with a 4xx status.
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, std::filesystem::path image_root);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds to host:port (port 0 picks a free port). Throws Io when the
  /// port cannot be bound.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop() is called.
  void serve();
  void stop();
  bool running() const;

 private:
  void routes();

  ReviewService& service_;
  std::filesystem::path image_root_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace medcorpus
