// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mdd/corpus.hpp"
#include "mdd/denoiser.hpp"
#include "mdd/diffusion.hpp"
#include "mdd/metrics.hpp"
#include "mdd/motion.hpp"
#include "mdd/sampler.hpp"
#include "mdd/synth.hpp"
#include "mdd/vq.hpp"

namespace py = pybind11;
using namespace mdd;

namespace {

TokenSequence to_tokens(const std::vector<int>& tokens, int K) {
  TokenSequence u;
  u.tokens = tokens;
  u.codebook_size = K;
  u.validate();
  return u;
}

CategoricalState to_state(const Eigen::MatrixXd& probs) {
  CategoricalState st;
  st.probs = probs;
  return st;
}

JointMotion to_joint_motion(const Eigen::MatrixXd& flat, uint32_t fps) {
  if (flat.cols() % 3 != 0) throw DataError("frames array must have 3*j columns");
  JointMotion m;
  m.fps = fps;
  m.j = static_cast<int>(flat.cols() / 3);
  for (Eigen::Index f = 0; f < flat.rows(); ++f) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> frame(m.j, 3);
    for (int k = 0; k < m.j; ++k) frame.row(k) = flat.block(f, 3 * k, 1, 3);
    m.frames.push_back(frame);
  }
  return m;
}

Eigen::MatrixXd from_joint_motion(const JointMotion& m) {
  Eigen::MatrixXd flat(m.frame_count(), 3 * m.j);
  for (int f = 0; f < m.frame_count(); ++f)
    for (int k = 0; k < m.j; ++k) flat.block(f, 3 * k, 1, 3) = m.frames[f].row(k);
  return flat;
}

struct PyPipeline {
  PipelineBundle bundle;

  std::vector<int> generate_tokens(const std::string& text, int length, double scale, int steps,
                                   uint64_t seed) const {
    GuidanceConfig cfg;
    cfg.scale = scale;
    cfg.steps = steps > 0 ? steps : bundle.denoiser.T;
    cfg.seed = seed;
    ConditionEmbedding cond = ConditionEmbedding::none();
    std::istringstream in(text);
    std::vector<std::string> toks;
    std::string t;
    while (in >> t) toks.push_back(t);
    if (!toks.empty() && bundle.hsa)
      cond = aggregate(*bundle.hsa, bundle.provider->embed(toks));
    const NoiseSchedule s =
        build_schedule(cfg.steps, bundle.denoiser.K, bundle.schedule_profile);
    return generate(bundle.denoiser, cond, cfg, length, s).tokens;
  }

  Eigen::MatrixXd generate_features(const std::string& text, int length, double scale, int steps,
                                    uint64_t seed) const {
    GuidanceConfig cfg;
    cfg.scale = scale;
    cfg.steps = steps > 0 ? steps : bundle.denoiser.T;
    cfg.seed = seed;
    std::istringstream in(text);
    std::vector<std::string> toks;
    std::string t;
    while (in >> t) toks.push_back(t);
    return generate_motion(toks, bundle, cfg, length).features;
  }
};

}  // namespace

PYBIND11_MODULE(_mdd, m) {
  m.doc() = "Motion discrete diffusion core (C++)";
  m.attr("__version__") = "0.1.0";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericalError>(m, "NumericalError");

  // ---- diffusion process ----
  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_readonly("T", &NoiseSchedule::T)
      .def_readonly("K", &NoiseSchedule::K)
      .def_readonly("profile", &NoiseSchedule::profile)
      .def_readonly("alpha", &NoiseSchedule::alpha)
      .def_readonly("beta", &NoiseSchedule::beta)
      .def_readonly("gamma", &NoiseSchedule::gamma)
      .def_readonly("bar_alpha", &NoiseSchedule::bar_alpha)
      .def_readonly("bar_gamma", &NoiseSchedule::bar_gamma)
      .def("to_json", [](const NoiseSchedule& s) { return s.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return NoiseSchedule::from_json(nlohmann::json::parse(text));
      });

  m.def("build_schedule", &build_schedule, py::arg("T"), py::arg("K"),
        py::arg("profile") = "mask-and-replace");
  m.def("transition_matrix", &transition_matrix, py::arg("schedule"), py::arg("t"));
  m.def(
      "marginal",
      [](const std::vector<int>& u0, int K, const NoiseSchedule& s, int t) {
        return marginal(to_tokens(u0, K), s, t).probs;
      },
      py::arg("u0"), py::arg("K"), py::arg("schedule"), py::arg("t"));
  m.def(
      "posterior",
      [](const std::vector<int>& u_t, const std::vector<int>& u0, int K, const NoiseSchedule& s,
         int t) { return posterior(to_tokens(u_t, K), to_tokens(u0, K), s, t).probs; },
      py::arg("u_t"), py::arg("u0"), py::arg("K"), py::arg("schedule"), py::arg("t"));
  m.def(
      "forward_sample",
      [](const std::vector<int>& u_prev, int K, const NoiseSchedule& s, int t, uint64_t seed) {
        Rng rng(seed);
        return forward_sample(to_tokens(u_prev, K), s, t, rng).tokens;
      },
      py::arg("u_prev"), py::arg("K"), py::arg("schedule"), py::arg("t"), py::arg("seed") = 0);
  m.def(
      "vlb_loss",
      [](const Eigen::MatrixXd& model_posterior, const std::vector<int>& u_t,
         const std::vector<int>& u0, int K, const NoiseSchedule& s, int t) {
        return vlb_loss(to_state(model_posterior), to_tokens(u_t, K), to_tokens(u0, K), s, t);
      },
      py::arg("model_posterior"), py::arg("u_t"), py::arg("u0"), py::arg("K"),
      py::arg("schedule"), py::arg("t"));

  // ---- vector quantization ----
  m.def(
      "quantize",
      [](const Eigen::MatrixXd& z, const Eigen::MatrixXd& entries) {
        Codebook book;
        book.entries = entries;
        book.ema_counts = Eigen::VectorXd::Ones(entries.rows());
        book.ema_sums = entries;
        const QuantizationResult res = quantize(z, book);
        return py::make_tuple(res.tokens.tokens, res.z_q, res.distances);
      },
      py::arg("z"), py::arg("entries"), "Returns (tokens, z_q, distances)");
  m.def(
      "vq_loss",
      [](const Eigen::MatrixXd& mm, const Eigen::MatrixXd& m_tilde, const Eigen::MatrixXd& z,
         const Eigen::MatrixXd& z_q, double beta) {
        const VqLossTerms t = vq_loss(mm, m_tilde, z, z_q, beta);
        return py::make_tuple(t.total, t.recon, t.embed, t.commit);
      },
      py::arg("m"), py::arg("m_tilde"), py::arg("z"), py::arg("z_q"), py::arg("beta"));
  m.def(
      "ema_update",
      [](const Eigen::MatrixXd& entries, const Eigen::VectorXd& counts,
         const Eigen::MatrixXd& sums, const Eigen::MatrixXd& z, const std::vector<int>& tokens,
         double decay) {
        Codebook book;
        book.entries = entries;
        book.ema_counts = counts;
        book.ema_sums = sums;
        const Codebook out =
            ema_update(book, z, to_tokens(tokens, static_cast<int>(entries.rows())), decay);
        return py::make_tuple(out.entries, out.ema_counts, out.ema_sums);
      },
      py::arg("entries"), py::arg("counts"), py::arg("sums"), py::arg("z"), py::arg("tokens"),
      py::arg("decay"));

  // ---- guidance + sampling ----
  m.def(
      "apply_guidance",
      [](const Eigen::MatrixXd& p_cond, const Eigen::MatrixXd& p_uncond, double s) {
        return apply_guidance(to_state(p_cond), to_state(p_uncond), s).probs;
      },
      py::arg("p_cond"), py::arg("p_uncond"), py::arg("s"));
  m.def(
      "gumbel_sample",
      [](const Eigen::MatrixXd& probs, uint64_t seed) {
        Rng rng(seed);
        return gumbel_sample(to_state(probs), rng).tokens;
      },
      py::arg("probs"), py::arg("seed") = 0);

  // ---- metrics ----
  auto fs = [](const Eigen::MatrixXd& rows) {
    FeatureSet f;
    f.rows = rows;
    return f;
  };
  m.def(
      "fid", [fs](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return fid(fs(a), fs(b)); },
      py::arg("real"), py::arg("gen"));
  m.def(
      "fid_gaussian",
      [](const Eigen::VectorXd& mu_r, const Eigen::MatrixXd& cov_r, const Eigen::VectorXd& mu_g,
         const Eigen::MatrixXd& cov_g) {
        return fid_from_summaries({mu_r, cov_r}, {mu_g, cov_g});
      },
      py::arg("mu_real"), py::arg("cov_real"), py::arg("mu_gen"), py::arg("cov_gen"));
  m.def(
      "mm_dist",
      [fs](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return mm_dist(fs(a), fs(b)); },
      py::arg("motion"), py::arg("text"));
  m.def(
      "r_precision",
      [fs](const Eigen::MatrixXd& motion, const Eigen::MatrixXd& text, int pool, uint64_t seed) {
        Rng rng(seed);
        const RPrecisionResult r = r_precision(fs(motion), fs(text), pool, rng);
        return py::make_tuple(r.top1, r.top2, r.top3);
      },
      py::arg("motion"), py::arg("text"), py::arg("pool_size") = 32, py::arg("seed") = 0);
  m.def(
      "diversity",
      [fs](const Eigen::MatrixXd& feats, int subset, uint64_t seed) {
        Rng rng(seed);
        return diversity(fs(feats), subset, rng);
      },
      py::arg("features"), py::arg("subset") = 300, py::arg("seed") = 0);
  m.def(
      "mmodality",
      [fs](const std::map<std::string, Eigen::MatrixXd>& per_text, uint64_t seed) {
        std::map<std::string, FeatureSet> sets;
        for (const auto& [k, v] : per_text) sets[k] = fs(v);
        Rng rng(seed);
        return mmodality(sets, rng);
      },
      py::arg("per_text"), py::arg("seed") = 0);

  // ---- motion codec ----
  m.def(
      "canonicalize",
      [](const Eigen::MatrixXd& frames, uint32_t fps, uint32_t target_fps, int max_frames) {
        const CanonicalizeResult res = canonicalize(to_joint_motion(frames, fps), target_fps,
                                                    max_frames);
        return py::make_tuple(from_joint_motion(res.motion), res.resampled_by_interpolation);
      },
      py::arg("frames"), py::arg("fps"), py::arg("target_fps") = kCanonicalFps,
      py::arg("max_frames") = kMaxClipFrames,
      "frames: (N, 3*j) row-major joint positions. Returns (frames, resampled_flag).");
  m.def(
      "encode_features",
      [](const Eigen::MatrixXd& frames, uint32_t fps) {
        return encode_features(to_joint_motion(frames, fps)).features;
      },
      py::arg("frames"), py::arg("fps") = kCanonicalFps);
  m.def(
      "decode_features",
      [](const Eigen::MatrixXd& features, uint32_t fps) {
        MotionClip clip;
        clip.features = features;
        clip.fps = fps;
        return from_joint_motion(decode_features(clip));
      },
      py::arg("features"), py::arg("fps") = kCanonicalFps);

  // ---- caption scoring ----
  m.def(
      "caption_nll",
      [](const std::vector<std::string>& tokens,
         const std::function<double(const std::vector<std::string>&, size_t)>& prob) {
        class CallbackModel : public NextTokenModel {
         public:
          explicit CallbackModel(
              std::function<double(const std::vector<std::string>&, size_t)> fn)
              : fn_(std::move(fn)) {}
          double prob(const std::vector<std::string>& toks, size_t i) const override {
            return fn_(toks, i);
          }

         private:
          std::function<double(const std::vector<std::string>&, size_t)> fn_;
        } model(prob);
        const CaptionNll r = caption_nll(tokens, model);
        return py::make_tuple(r.value, r.zero_probability);
      },
      py::arg("tokens"), py::arg("prob"),
      "prob(tokens, i) -> p(tokens[i] | tokens[:i]). Returns (nll, zero_prob_flag).");

  // ---- end-to-end pipeline ----
  py::class_<PyPipeline>(m, "Pipeline")
      .def(py::init([](const std::string& vq_path, const std::string& denoiser_path) {
        PyPipeline p;
        auto [vq_model, book] = load_vq_checkpoint(vq_path);
        p.bundle.vq = std::move(vq_model);
        p.bundle.book = std::move(book);
        DenoiserCheckpoint ckpt = load_denoiser_checkpoint(denoiser_path);
        p.bundle.denoiser = std::move(ckpt.net);
        p.bundle.hsa = std::move(ckpt.hsa);
        p.bundle.provider = std::make_shared<NgramHashProvider>(
            ckpt.provider_layers, ckpt.provider_widths, ckpt.provider_seed);
        p.bundle.schedule_profile = ckpt.schedule_profile;
        return p;
      }))
      .def("generate_tokens", &PyPipeline::generate_tokens, py::arg("text"), py::arg("length"),
           py::arg("scale") = 2.0, py::arg("steps") = 0, py::arg("seed") = 0)
      .def("generate_features", &PyPipeline::generate_features, py::arg("text"),
           py::arg("length"), py::arg("scale") = 2.0, py::arg("steps") = 0, py::arg("seed") = 0);
}
