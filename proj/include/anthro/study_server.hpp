#pragma once

// HTTP front of the reader study. Responses before a session is complete never
// carry labels, levels or stack ids.

#include <string>

#include "httplib.h"
#include "json.hpp"

#include "anthro/study.hpp"

namespace anthro {

class StudyServer {
 public:
  explicit StudyServer(StudyStore& store) : store_(store) { routes(); }

  httplib::Server& http() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  using json = nlohmann::json;

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFound& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const Conflict& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const Invalid& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const ConfigError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const InsufficientDataError& e) {
      reply(res, 422, {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  static int int_param(const httplib::Request& req, std::size_t i) {
    try {
      return std::stoi(req.matches[i].str());
    } catch (const std::exception&) {
      throw NotFound("bad index");
    }
  }

  json progress(const Session& s) const {
    json j{{"session_id", s.id()},
           {"n_trials", s.size()},
           {"scored", s.scored()},
           {"complete", s.complete()},
           {"frame_rate", s.plan().frame_rate}};
    const auto next = s.next_trial();
    j["next_trial"] = next ? json(*next) : json(nullptr);
    return j;
  }

  void routes() {
    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        const StudyPlan plan = study_plan_from_json(body.contains("plan") ? body.at("plan") : body);
        auto s = store_.create_session(plan);
        const auto first = store_.stack(s->trial(1).stack_id);
        json trials = json::array();
        for (std::size_t k = 0; k < s->size(); ++k) trials.push_back({{"index", k + 1}, {"token", s->trials()[k].token}});
        reply(res, 201,
              {{"session_id", s->id()},
               {"n_trials", s->size()},
               {"frames_per_trial", first->dims.slices},
               {"frame_width", first->dims.cols},
               {"frame_height", first->dims.rows},
               {"frame_rate", plan.frame_rate},
               {"trials", trials}});
      });
    });

    server_.Get(R"(/api/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, progress(*store_.session(req.matches[1]))); });
    });

    server_.Get(R"(/api/sessions/([0-9a-f]+)/trials/(\d+)/frames/(\d+))",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    auto s = store_.session(req.matches[1]);
                    res.status = 200;
                    res.set_content(store_.frame_png(*s, int_param(req, 2), int_param(req, 3)), "image/png");
                  });
                });

    server_.Post(R"(/api/sessions/([0-9a-f]+)/trials/(\d+)/score)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                     auto s = store_.session(req.matches[1]);
                     const int k = int_param(req, 2);
                     s->trial(k);
                     const json body = json::parse(req.body);
                     if (!body.contains("score") || !body.at("score").is_number_integer())
                       throw Invalid("score must be an integer in 0..3");
                     const double rt = body.contains("response_time_ms") && body.at("response_time_ms").is_number()
                                           ? body.at("response_time_ms").get<double>()
                                           : -1.0;
                     s->submit(k, body.at("score").get<int>(), rt);
                     json ack = progress(*s);
                     ack["trial"] = k;
                     reply(res, 201, ack);
                   });
                 });

    server_.Get(R"(/api/sessions/([0-9a-f]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = store_.session(req.matches[1]);
        if (!s->complete()) throw Conflict("results are available once every trial is scored");
        json out = to_json(study_results(store_.scored_trials(*s)));
        out["session_id"] = s->id();
        out["n_trials"] = s->size();
        reply(res, 200, out);
      });
    });
  }

  StudyStore& store_;
  httplib::Server server_;
};

}  // namespace anthro
