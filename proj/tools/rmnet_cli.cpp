#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmnet/bounds.hpp"
#include "rmnet/dataset.hpp"
#include "rmnet/gadgets.hpp"
#include "rmnet/memorize.hpp"
#include "rmnet/reduce.hpp"
#include "rmnet/net.hpp"

namespace {

using namespace rmnet;

// exit codes: 0 ok, 1 file/parse error, 2 precondition/regime error, 3 verification failed

NormIndex parse_p(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF") return NormIndex::infinity();
  const double p = std::stod(s);
  if (p < 1.0) throw ConstructError("p must lie in [1, inf]");
  return NormIndex::finite(p);
}

int cmd_construct(const std::string& dataset_path, double rho, const std::string& p_str,
                  const std::string& regime, std::optional<double> eta, std::uint64_t seed,
                  const std::string& out_path, const std::string& report_path,
                  std::optional<double> quantize_nu) {
  Dataset ds;
  try {
    ds = load_csv(dataset_path);
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    if (!(rho > 0.0) || !(rho < 1.0))
      throw ConstructError("rho must lie in (0,1): this range covers the entire regime");
    NormIndex p = parse_p(p_str);
    RobustSpec spec{p, rho};

    std::pair<Network, RegimeReport> built = [&] {
      if (regime == "auto") return p.is_two() ? construct_auto(ds, spec, eta, seed)
                                              : construct_lp(ds, spec, eta, seed);
      if (!p.is_two()) throw ConstructError("explicit regimes support p = 2 only");
      if (regime == "small") return construct_small_rho(ds, rho, seed);
      if (regime == "moderate") {
        if (!eta) throw ConstructError("eta required for the moderate regime");
        return construct_moderate_rho(ds, rho, *eta, seed);
      }
      if (regime == "large") return construct_large_rho(ds, rho, seed);
      throw ConstructError("unknown regime '" + regime + "'");
    }();

    Network net = std::move(built.first);
    RegimeReport rep = std::move(built.second);
    if (quantize_nu) {
      double r = 0.0;
      for (const auto& pt : ds.points) r = std::max(r, norm_p(pt, NormIndex::finite(2.0)));
      std::vector<std::vector<double>> probes;
      Rng prng = Rng::split(seed, 0x70);
      for (const auto& c : ds.points) {
        auto b = sample_ball(c, rep.mu, spec.p, prng, 64);
        probes.insert(probes.end(), b.begin(), b.end());
      }
      QuantizeResult q = quantize_network(net, *quantize_nu, std::max(1.0, r + rep.mu),
                                          QuantizeMode::Empirical, true, ds.n_classes, seed,
                                          &probes);
      net = std::move(q.net);
      rep.bit_complexity = q.bit_complexity;
      rep.achieved = resources(net);
    }

    nlohmann::json meta;
    meta["generator"] = "rmnet construct";
    meta["rho"] = rho;
    meta["seed"] = seed;
    save_network(net, out_path, meta.dump());
    const std::string rp = report_path.empty() ? out_path + ".report.json" : report_path;
    std::ofstream rf(rp);
    rf << rep.to_json() << "\n";
    std::cout << "wrote " << out_path << " and " << rp << "\n";
    return 0;
  } catch (const ConstructError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ReduceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& net_path, const std::string& dataset_path, double rho,
               const std::string& p_str, std::size_t samples, std::uint64_t seed,
               std::optional<double> eta) {
  if (samples == 0) {
    std::cerr << "error: need K >= 1 samples per ball\n";
    return 2;
  }
  Network net;
  Dataset ds;
  try {
    net = load_network(net_path);
    ds = load_csv(dataset_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    RobustSpec spec{parse_p(p_str), rho};
    VerificationStats st = verify_robust(net, ds, spec, samples, seed);
    std::cout << st.to_json() << "\n";
    if (st.exact) return 0;
    if (eta && st.worst_wilson <= *eta) return 0;
    std::cerr << "verification failed: worst ball " << st.worst_ball << " wilson upper "
              << st.worst_wilson << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_bounds(std::size_t n, std::size_t d, double rho, const std::string& p_str) {
  try {
    NormIndex p = parse_p(p_str);
    LowerBoundReport r = lower_bounds(n, d, rho, p);
    nlohmann::json j;
    j["schema"] = "v1";
    j["n"] = n;
    j["d"] = d;
    j["rho"] = rho;
    j["p"] = r.p_inf ? nlohmann::json("inf") : nlohmann::json(r.p);
    j["width_lb"] = r.width_lb;
    j["width_branch"] = r.width_branch;
    j["vc_param_lb"] = r.vc_param_lb;
    j["vc_branch"] = r.vc_branch;
    j["combined_param_lb"] = r.combined_param_lb;
    j["note"] = "order-only: constants reported as 1";
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_sweep(std::size_t n, std::size_t d, const std::string& rhos_csv,
              const std::string& out_path, std::uint64_t seed, double eta) {
  std::vector<double> rhos;
  {
    std::stringstream ss(rhos_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) rhos.push_back(std::stod(tok));
  }
  if (rhos.empty()) {
    std::cerr << "error: empty --rhos list\n";
    return 2;
  }
  Rng rng = Rng::split(seed, 0x57);
  Dataset ds = random_dataset(n, d, 2, rng);
  std::ofstream f(out_path);
  if (!f) {
    std::cerr << "error: cannot open " << out_path << "\n";
    return 1;
  }
  f << "rho,regime,status,params_all,params_nonzero,width,depth,theoretical_bound\n";
  std::size_t successes = 0;
  for (double rho : rhos) {
    try {
      RobustSpec spec{NormIndex::finite(2.0), rho};
      auto [net, rep] = construct_auto(ds, spec, eta, seed);
      const ResourceProfile r = rep.achieved;
      f << rho << "," << regime_name(rep.regime) << ",ok," << r.params_all << ","
        << r.params_nonzero << "," << r.width << "," << r.depth << ","
        << rep.theoretical_param_bound << "\n";
      ++successes;
    } catch (const std::exception& e) {
      std::string what = e.what();
      for (char& c : what)
        if (c == ',' || c == '\n') c = ';';
      f << rho << ",-,failed:" << what << ",,,,,\n";
    }
  }
  std::cout << "wrote " << out_path << " (" << successes << "/" << rhos.size()
            << " constructions succeeded)\n";
  return successes > 0 ? 0 : 2;
}

int cmd_gadget(const std::string& kind, const std::vector<double>& args,
               const std::string& out_path) {
  try {
    Network net = [&]() -> Network {
      auto need = [&](std::size_t k) {
        if (args.size() != k)
          throw NetError("gadget '" + kind + "' expects " + std::to_string(k) + " args");
      };
      if (kind == "bump") {
        need(3);
        return gadgets::bump((std::size_t)args[0], (std::size_t)args[1], args[2]);
      }
      if (kind == "triangle") {
        need(0);
        return gadgets::triangle();
      }
      if (kind == "floor") {
        need(2);
        return gadgets::floor_gadget((std::size_t)args[0], args[1]);
      }
      if (kind == "flatten") {
        need(3);
        return gadgets::flatten_gadget((std::size_t)args[0], (std::size_t)args[1], args[2]);
      }
      if (kind == "max") {
        need(0);
        return gadgets::running_max();
      }
      if (kind == "square") {
        need(1);
        return gadgets::square_approx((std::size_t)args[0]);
      }
      throw NetError("unknown gadget kind '" + kind +
                     "' (bump|triangle|floor|flatten|max|square)");
    }();
    nlohmann::json meta;
    meta["generator"] = "rmnet gadget " + kind;
    save_network(net, out_path, meta.dump());
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rmnet: constructive robust memorization networks"};
  app.require_subcommand(1);

  // construct
  std::string dataset_path, out_path, report_path, p_str = "2", regime = "auto";
  double rho = 0.0;
  std::optional<double> eta, quantize_nu;
  std::uint64_t seed = 1;
  auto* c = app.add_subcommand("construct", "build a robust memorizer for a CSV dataset");
  c->add_option("--dataset", dataset_path)->required();
  c->add_option("--rho", rho)->required();
  c->add_option("--p", p_str);
  c->add_option("--regime", regime)->check(CLI::IsMember({"auto", "small", "moderate", "large"}));
  c->add_option("--eta", eta);
  c->add_option("--seed", seed);
  c->add_option("--out", out_path)->required();
  c->add_option("--report", report_path);
  c->add_option("--quantize", quantize_nu);

  // verify
  std::string net_path;
  std::size_t samples = 1000;
  auto* v = app.add_subcommand("verify", "sample robustness balls and check labels");
  v->add_option("--net", net_path)->required();
  v->add_option("--dataset", dataset_path)->required();
  v->add_option("--rho", rho)->required();
  v->add_option("--p", p_str);
  v->add_option("--samples", samples)->required();
  v->add_option("--seed", seed);
  v->add_option("--eta", eta);

  // bounds
  std::size_t n = 0, d = 0;
  auto* b = app.add_subcommand("bounds", "closed-form lower bounds");
  b->add_option("--n", n)->required();
  b->add_option("--d", d)->required();
  b->add_option("--rho", rho)->required();
  b->add_option("--p", p_str);

  // sweep
  std::string rhos_csv;
  double sweep_eta = 0.05;
  auto* s = app.add_subcommand("sweep", "construct across a rho list, emit CSV");
  s->add_option("--n", n)->required();
  s->add_option("--d", d)->required();
  s->add_option("--rhos", rhos_csv)->required();
  s->add_option("--out", out_path)->required();
  s->add_option("--seed", seed);
  s->add_option("--eta", sweep_eta);

  // gadget
  std::string kind;
  std::vector<double> gargs;
  auto* g = app.add_subcommand("gadget", "emit a gadget as network JSON");
  g->add_option("--kind", kind)->required();
  g->add_option("--args", gargs)->delimiter(',');
  g->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  if (c->parsed())
    return cmd_construct(dataset_path, rho, p_str, regime, eta, seed, out_path, report_path,
                         quantize_nu);
  if (v->parsed()) return cmd_verify(net_path, dataset_path, rho, p_str, samples, seed, eta);
  if (b->parsed()) return cmd_bounds(n, d, rho, p_str);
  if (s->parsed()) return cmd_sweep(n, d, rhos_csv, out_path, seed, sweep_eta);
  if (g->parsed()) return cmd_gadget(kind, gargs, out_path);
  return 0;
}
