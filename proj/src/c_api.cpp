#include "rmdp/rmdp_c.h"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rmdp/envs.hpp"
#include "rmdp/error.hpp"
#include "rmdp/learn.hpp"
#include "rmdp/model.hpp"
#include "rmdp/oracle.hpp"
#include "rmdp/rng.hpp"
#include "rmdp/text_format.hpp"
#include "rmdp/transforms.hpp"

using nlohmann::json;

struct RmdpModel {
  rmdp::Rmdp m;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

RmdpStatus fail(RmdpStatus st, const std::string& msg) {
  g_last_error = msg;
  return st;
}

RmdpStatus from_error(const rmdp::Error& e) {
  switch (e.code) {
    case rmdp::ErrorCode::InvalidArgument:
    case rmdp::ErrorCode::Io:
      return fail(RMDP_ERR_USAGE, e.what());
    default:
      return fail(RMDP_ERR_DOMAIN, e.what());
  }
}

template <typename Fn>
RmdpStatus guarded(Fn&& fn) {
  try {
    fn();
    return RMDP_OK;
  } catch (const rmdp::Error& e) {
    return from_error(e);
  } catch (const std::exception& e) {
    return fail(RMDP_ERR_DOMAIN, e.what());
  }
}

json hyper_to_json(const rmdp::learn::Hyperparameters& h) {
  return json{{"alpha", h.alpha},
              {"alpha_power", h.alpha_power},
              {"eps_initial", h.eps_initial},
              {"eps_final", h.eps_final},
              {"eps_decay_steps", h.eps_decay_steps},
              {"quant", h.quant},
              {"step_cap", h.step_cap},
              {"total_steps", h.total_steps},
              {"lambda", h.lambda},
              {"q_init", h.q_init},
              {"seed", h.seed},
              {"start_comp", h.start_comp},
              {"start_entry", h.start_entry},
              {"eval_every", h.eval_every},
              {"eval_episodes", h.eval_episodes},
              {"include_truncated_eval", h.include_truncated_eval}};
}

std::string vertex_label(const rmdp::Component& c, int vid) {
  const rmdp::Vertex& v = c.vertices[vid];
  switch (v.kind) {
    case rmdp::VertexKind::Node:
      return c.nodes[v.node];
    case rmdp::VertexKind::CallPort: {
      const rmdp::Component& callee = c;  // names resolved by caller
      (void)callee;
      return c.boxes[v.box].name + ".call" + std::to_string(v.port);
    }
    case rmdp::VertexKind::ReturnPort:
      return c.boxes[v.box].name + ".ret" + std::to_string(v.port);
  }
  return "?";
}

}  // namespace

extern "C" {

const char* rmdp_last_error(void) { return g_last_error.c_str(); }

void rmdp_string_free(char* s) { delete[] s; }

RmdpStatus rmdp_model_from_string(const char* text, RmdpModel** out) {
  if (!text || !out) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out = new RmdpModel{rmdp::text::parse(text)}; });
}

RmdpStatus rmdp_model_from_file(const char* path, RmdpModel** out) {
  if (!path || !out) return fail(RMDP_ERR_USAGE, "null argument");
  std::ifstream in(path);
  if (!in) return fail(RMDP_ERR_USAGE, std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return rmdp_model_from_string(ss.str().c_str(), out);
}

RmdpStatus rmdp_model_builtin(const char* name, RmdpModel** out) {
  if (!name || !out) return fail(RMDP_ERR_USAGE, "null argument");
  std::string n = name;
  return guarded([&] {
    if (n == "cloud") {
      *out = new RmdpModel{rmdp::envs::cloud_rmdp()};
    } else if (n == "spelunking") {
      *out = new RmdpModel{rmdp::envs::spelunking_rmdp(0.5, 0.01, rmdp::envs::default_spelunk_layout())};
    } else if (n == "palindrome") {
      *out = new RmdpModel{rmdp::envs::palindrome_env()};
    } else if (n.rfind("chain:", 0) == 0) {
      int k = std::stoi(n.substr(6));
      *out = new RmdpModel{rmdp::transforms::hierarchical_chain(k)};
    } else {
      throw rmdp::Error(rmdp::ErrorCode::InvalidArgument, "unknown builtin model: " + n);
    }
  });
}

void rmdp_model_free(RmdpModel* m) { delete m; }

RmdpStatus rmdp_model_serialize(const RmdpModel* m, char** out_text) {
  if (!m || !out_text) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out_text = dup_string(rmdp::text::serialize(m->m)); });
}

RmdpStatus rmdp_model_validate(const RmdpModel* m, char** out_json, int* out_count) {
  if (!m || !out_json || !out_count) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] {
    auto diags = rmdp::validate(m->m);
    json arr = json::array();
    for (const auto& d : diags)
      arr.push_back(json{{"rule", d.rule},
                         {"component", d.component},
                         {"vertex", d.vertex},
                         {"message", d.message}});
    *out_count = (int)diags.size();
    *out_json = dup_string(arr.dump(2));
  });
}

RmdpStatus rmdp_model_is_single_exit(const RmdpModel* m, int* out) {
  if (!m || !out) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out = rmdp::is_single_exit(m->m) ? 1 : 0; });
}

RmdpStatus rmdp_model_diameter(const RmdpModel* m, double* out) {
  if (!m || !out) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out = rmdp::diameter(m->m); });
}

RmdpStatus rmdp_solve(const RmdpModel* m, const char* algo, int stack_bound, double tol,
                      char** out_json) {
  if (!m || !algo || !out_json) return fail(RMDP_ERR_USAGE, "null argument");
  std::string a = algo;
  return guarded([&] {
    json rep;
    rep["algo"] = a;
    if (a == "1exit") {
      auto sol = rmdp::oracle::solve_1exit(m->m);
      json values = json::object();
      json strategy = json::object();
      for (size_t ci = 0; ci < m->m.components.size(); ++ci) {
        const rmdp::Component& c = m->m.components[ci];
        for (int vid = 0; vid < (int)c.vertices.size(); ++vid) {
          rmdp::GlobalVertex gv{(int)ci, vid};
          auto it = sol.values.find(gv);
          if (it != sol.values.end())
            values[c.name + "/" + vertex_label(c, vid)] = it->second;
          auto st = sol.strategy.find(gv);
          if (st != sol.strategy.end())
            strategy[c.name + "/" + vertex_label(c, vid)] = c.actions[st->second];
        }
      }
      rep["values"] = values;
      rep["strategy"] = strategy;
      rep["residual"] = sol.residual;
      rep["iterations"] = sol.iterations;
    } else if (a == "truncated") {
      auto vals = rmdp::oracle::solve_truncated(m->m, stack_bound, tol);
      json values = json::object();
      for (size_t ci = 0; ci < m->m.components.size(); ++ci) {
        const rmdp::Component& c = m->m.components[ci];
        for (int vid = 0; vid < (int)c.vertices.size(); ++vid)
          values[c.name + "/" + vertex_label(c, vid)] = vals[ci][vid];
      }
      rep["values"] = values;
      rep["stack_bound"] = stack_bound;
      rep["tol"] = tol;
    } else if (a == "deterministic") {
      auto vals = rmdp::oracle::solve_deterministic(m->m, stack_bound > 0 ? stack_bound : 64);
      json values = json::object();
      for (const auto& [key, v] : vals) {
        const rmdp::Component& c = m->m.components[key.first];
        values[c.name + "/" + c.nodes[key.second]] = v;
      }
      rep["values"] = values;
    } else {
      throw rmdp::Error(rmdp::ErrorCode::InvalidArgument, "unknown solve algorithm: " + a);
    }
    *out_json = dup_string(rep.dump(2));
  });
}

RmdpStatus rmdp_export_lp(const RmdpModel* m, char** out_text) {
  if (!m || !out_text) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out_text = dup_string(rmdp::oracle::lp_export_1exit(m->m)); });
}

RmdpStatus rmdp_pac_1exit(const RmdpModel* m, double eps, double delta, double K, uint64_t seed,
                          char** out_json) {
  if (!m || !out_json) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] {
    rmdp::Rng rng(seed);
    const rmdp::Rmdp& model = m->m;
    auto sampler = [&](int comp, int vid, int action) {
      const rmdp::TransitionRow* row = model.components[comp].row(vid, action);
      double u = rng.next_double();
      double acc = 0.0;
      int dst = row->dests.back().first;
      for (const auto& [d, p] : row->dests) {
        acc += p;
        if (u < acc) {
          dst = d;
          break;
        }
      }
      return dst;
    };
    auto res = rmdp::oracle::pac_learn_1exit(sampler, model, eps, delta, K, rmdp::diameter(model));
    json values = json::object();
    for (size_t ci = 0; ci < model.components.size(); ++ci) {
      const rmdp::Component& c = model.components[ci];
      for (int en : c.entries) {
        auto it = res.solution.values.find(rmdp::GlobalVertex{(int)ci, en});
        if (it != res.solution.values.end()) values[c.name + "/" + c.nodes[en]] = it->second;
      }
    }
    *out_json = dup_string(json{{"eps", res.eps},
                                {"delta", res.delta},
                                {"samples_per_row", res.samples_per_row},
                                {"row_l1_target", res.row_l1_target},
                                {"values", values}}
                               .dump(2));
  });
}

void rmdp_hyper_init(RmdpHyper* h) {
  rmdp::learn::Hyperparameters d;
  h->alpha = d.alpha;
  h->alpha_power = d.alpha_power;
  h->eps_initial = d.eps_initial;
  h->eps_final = d.eps_final;
  h->eps_decay_steps = d.eps_decay_steps;
  h->quant = d.quant;
  h->step_cap = d.step_cap;
  h->total_steps = d.total_steps;
  h->lambda = d.lambda;
  h->q_init = d.q_init;
  h->seed = d.seed;
  h->start_comp = d.start_comp;
  h->start_entry = d.start_entry;
  h->eval_every = d.eval_every;
  h->eval_episodes = d.eval_episodes;
  h->include_truncated_eval = d.include_truncated_eval ? 1 : 0;
}

RmdpStatus rmdp_train(const RmdpModel* m, const char* algo, const RmdpHyper* h, char** out_csv,
                      double* out_final, long* out_qsize) {
  if (!m || !algo || !h || !out_csv) return fail(RMDP_ERR_USAGE, "null argument");
  std::string a = algo;
  return guarded([&] {
    rmdp::learn::Algo al;
    if (a == "rql")
      al = rmdp::learn::Algo::Rql;
    else if (a == "rql1")
      al = rmdp::learn::Algo::Rql1;
    else if (a == "flat-q")
      al = rmdp::learn::Algo::FlatQ;
    else
      throw rmdp::Error(rmdp::ErrorCode::InvalidArgument, "unknown training algorithm: " + a);
    rmdp::learn::Hyperparameters hp;
    hp.alpha = h->alpha;
    hp.alpha_power = h->alpha_power;
    hp.eps_initial = h->eps_initial;
    hp.eps_final = h->eps_final;
    hp.eps_decay_steps = h->eps_decay_steps;
    hp.quant = h->quant;
    hp.step_cap = h->step_cap;
    hp.total_steps = h->total_steps;
    hp.lambda = h->lambda;
    hp.q_init = h->q_init;
    hp.seed = h->seed;
    hp.start_comp = h->start_comp;
    hp.start_entry = h->start_entry;
    hp.eval_every = h->eval_every;
    hp.eval_episodes = h->eval_episodes;
    hp.include_truncated_eval = h->include_truncated_eval != 0;
    auto res = rmdp::learn::train(m->m, hp, al);
    std::ostringstream csv;
    csv << "step,mean_return\n";
    csv.precision(10);
    for (const auto& [step, v] : res.curve.points) csv << step << "," << v << "\n";
    *out_csv = dup_string(csv.str());
    if (out_final)
      *out_final = res.curve.points.empty() ? 0.0 : res.curve.points.back().second;
    if (out_qsize) *out_qsize = (long)res.q.entries.size();
  });
}

RmdpStatus rmdp_add_exit_lane(const RmdpModel* m, double lambda, RmdpModel** out) {
  if (!m || !out) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] { *out = new RmdpModel{rmdp::transforms::add_exit_lane(m->m, lambda)}; });
}

RmdpStatus rmdp_pda_product(const RmdpModel* mdp, const char* pda_text, const char* success_states,
                            double reward_success, double reward_reject, double reward_step,
                            double corruption, RmdpModel** out) {
  if (!mdp || !pda_text || !out) return fail(RMDP_ERR_USAGE, "null argument");
  return guarded([&] {
    rmdp::transforms::Pda pda = rmdp::transforms::parse_pda(pda_text);
    std::set<int> success;
    if (success_states && *success_states) {
      if (mdp->m.components.size() != 1)
        throw rmdp::Error(rmdp::ErrorCode::FlatModelRequired, "product requires a flat model");
      const rmdp::Component& c = mdp->m.components[0];
      std::string names = success_states;
      size_t pos = 0;
      while (pos < names.size()) {
        size_t comma = names.find(',', pos);
        if (comma == std::string::npos) comma = names.size();
        std::string name = names.substr(pos, comma - pos);
        int idx = c.node_index(name);
        if (idx < 0)
          throw rmdp::Error(rmdp::ErrorCode::InvalidArgument, "unknown success node: " + name);
        success.insert(idx);
        pos = comma + 1;
      }
    }
    rmdp::transforms::ProductRewards rw;
    rw.success = reward_success;
    rw.reject = reward_reject;
    rw.step = reward_step;
    *out = new RmdpModel{rmdp::transforms::pda_product(mdp->m, pda, rw, corruption, success)};
  });
}

RmdpStatus rmdp_env_spec(const char* name, char** out_json) {
  if (!name || !out_json) return fail(RMDP_ERR_USAGE, "null argument");
  std::string n = name;
  return guarded([&] {
    rmdp::envs::EnvSpec spec;
    if (n == "cloud")
      spec = rmdp::envs::cloud_spec();
    else if (n == "spelunking")
      spec = rmdp::envs::spelunking_spec();
    else if (n == "palindrome")
      spec = rmdp::envs::palindrome_spec();
    else
      throw rmdp::Error(rmdp::ErrorCode::InvalidArgument, "unknown environment: " + n);
    *out_json = dup_string(json{{"name", spec.name},
                                {"start_comp", spec.start_comp},
                                {"start_entry", spec.start_entry},
                                {"hyper", hyper_to_json(spec.hyper)},
                                {"notes", spec.notes}}
                               .dump(2));
  });
}

}  // extern "C"
