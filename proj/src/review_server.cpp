#include "medcorpus/review_server.hpp"

#include <httplib.h>

#include "medcorpus/error.hpp"
#include "medcorpus/image_io.hpp"

namespace medcorpus {
namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownDataset:
    case ErrorCode::EndOfSubset:
    case ErrorCode::NoVerdict:
      return 404;
    case ErrorCode::InsufficientReview:
      return 422;
    default:
      return 400;
  }
}

void send_json(httplib::Response& res, const ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  send_json(res, {{"error", code}, {"detail", detail}}, status);
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), error_code_name(e.code()), e.detail());
    } catch (const json::exception& e) {
      send_error(res, 400, "InvalidArgument", e.what());
    }
  };
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + "='" + v + "' is not a non-negative integer");
  }
}

}  // namespace

ReviewServer::ReviewServer(ReviewService& service, std::filesystem::path image_root)
    : service_(service), image_root_(std::move(image_root)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::routes() {
  server_->Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
    ordered_json list = ordered_json::array();
    for (const auto& ds : service_.datasets()) {
      const auto agg = service_.aggregate(ds);
      list.push_back({{"dataset_name", ds},
                      {"sample_count", service_.sample_count(ds)},
                      {"subset_size", service_.subset(ds).size()},
                      {"min_samples_seen", service_.required_views(ds)},
                      {"aggregate", agg ? ordered_json(to_string(*agg)) : ordered_json(nullptr)}});
    }
    send_json(res, {{"datasets", list}, {"min_samples_seen", service_.policy().min_samples_seen}});
  }));

  server_->Get(R"(/datasets/([^/]+)/batch)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string ds = req.matches[1];
    const auto cursor = query_size(req, "cursor", 0);
    const auto size = query_size(req, "size", 10);
    const auto batch = service_.next_batch(ds, size, cursor);
    ordered_json samples = ordered_json::array();
    for (const auto& s : batch.samples) {
      ordered_json j = s.to_json();
      if (const auto* rec = service_.record(s.source_record_id)) {
        j["provenance"] = {{"modality", to_string(rec->modality)},
                           {"label", rec->label},
                           {"department", rec->department ? ordered_json(*rec->department) : ordered_json(nullptr)},
                           {"bbox", rec->bbox ? ordered_json({rec->bbox->x_min, rec->bbox->y_min, rec->bbox->x_max,
                                                              rec->bbox->y_max})
                                              : ordered_json(nullptr)},
                           {"source_dataset", rec->source_dataset}};
      }
      j["image_url"] = s.image_ref ? ordered_json("/images/" + s.source_record_id) : ordered_json(nullptr);
      samples.push_back(std::move(j));
    }
    send_json(res, {{"dataset_name", ds},
                    {"cursor", cursor},
                    {"next_cursor", batch.end ? ordered_json(nullptr) : ordered_json(batch.next_cursor)},
                    {"subset_size", service_.subset(ds).size()},
                    {"samples", samples}});
  }));

  server_->Get(R"(/images/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto* rec = service_.record(id);
    if (!rec) return send_error(res, 404, "UnknownRecord", id);
    const auto path = image_root_ / rec->image_ref;
    std::string bytes;
    try {
      bytes = read_text_file(path);
    } catch (const Error&) {
      return send_error(res, 404, "ImageMissing", rec->image_ref);
    }
    res.set_content(std::move(bytes), image_mime_type(path));
  }));

  server_->Post("/labels", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto label = QualityLabel::from_json(json::parse(req.body));
    if (label.reviewer.empty()) label.reviewer = req.get_header_value("X-Reviewer");
    service_.submit_label(label);
    const auto agg = service_.aggregate(label.dataset_name);
    send_json(res, {{"accepted", true},
                    {"dataset_name", label.dataset_name},
                    {"aggregate", to_string(*agg)},
                    {"decision", service_.retention(label.dataset_name).to_json()}});
  }));

  server_->Get(R"(/datasets/([^/]+)/decision)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string ds = req.matches[1];
    const auto decision = service_.retention(ds);
    ordered_json labels = ordered_json::object();
    for (const auto& [reviewer, v] : service_.labels(ds)) labels[reviewer] = to_string(v);
    send_json(res, {{"dataset_name", ds},
                    {"aggregate", to_string(*service_.aggregate(ds))},
                    {"labels", labels},
                    {"decision", decision.to_json()}});
  }));
}

int ReviewServer::bind(const std::string& host, int port) {
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  return bound;
}

void ReviewServer::serve() { server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

bool ReviewServer::running() const { return server_->is_running(); }

}  // namespace medcorpus
