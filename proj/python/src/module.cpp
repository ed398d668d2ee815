#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rwfast/adaptive.hpp"
#include "rwfast/bench.hpp"
#include "rwfast/errors.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/metrics.hpp"
#include "rwfast/phantom.hpp"
#include "rwfast/refresh.hpp"
#include "rwfast/rw_solver.hpp"
#include "rwfast/spectral_pack.hpp"

namespace py = pybind11;
using namespace rwfast;

namespace {

using Seeds = std::vector<std::pair<Index, int>>;

// numpy shape (.., rows, cols) <-> extents (cols, rows, ..).
std::vector<py::ssize_t> shape_of(const Dims& dims) {
  return {dims.extents.rbegin(), dims.extents.rend()};
}

Dims dims_of(const py::buffer_info& info) {
  if (info.ndim < 2 || info.ndim > 3) throw InvalidParam("images must be 2D or 3D arrays");
  return Dims{{info.shape.rbegin(), info.shape.rend()}};
}

Image image_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a,
                       std::vector<double> spacing) {
  const auto info = a.request();
  const auto* p = static_cast<const double*>(info.ptr);
  return make_image(dims_of(info), std::vector<double>(p, p + info.size), std::move(spacing));
}

py::array_t<double> image_to_array(const Image& image) {
  py::array_t<double> out(shape_of(image.dims));
  std::copy(image.intensities.begin(), image.intensities.end(), out.mutable_data());
  return out;
}

py::array_t<std::uint16_t> labels_to_array(const LabelMap& labels) {
  py::array_t<std::uint16_t> out(shape_of(labels.dims));
  std::copy(labels.labels.begin(), labels.labels.end(), out.mutable_data());
  return out;
}

LabelMap labels_from_array(py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> a) {
  const auto info = a.request();
  const auto* p = static_cast<const std::uint16_t*>(info.ptr);
  Dims d = info.ndim == 1 ? Dims{{static_cast<Index>(info.size), 1}} : dims_of(info);
  return LabelMap{std::move(d), std::vector<std::uint16_t>(p, p + info.size)};
}

// N x K probabilities reshaped to the image shape plus a label axis.
py::array_t<double> probabilities_to_array(const Dims& dims, const Eigen::MatrixXd& u) {
  auto shape = shape_of(dims);
  shape.push_back(u.cols());
  py::array_t<double> out(shape);
  double* dst = out.mutable_data();
  for (Index x = 0; x < u.rows(); ++x) {
    for (Index k = 0; k < u.cols(); ++k) *dst++ = u(x, k);
  }
  return out;
}

LabelProblem make_problem(const Image& image, const Seeds& seeds, int labels, double gamma,
                          std::optional<Eigen::MatrixXd> priors) {
  LabelProblem p;
  p.labels = labels;
  p.seeds = SeedPartition(image.size(), seeds);
  p.gamma = gamma;
  if (priors) {
    p.priors = std::move(priors);
  } else if (gamma > 0.0) {
    p.priors = gaussian_seed_priors(image, seeds, labels);
  }
  return p;
}

}  // namespace

PYBIND11_MODULE(_rwfast, m) {
  m.doc() = "Spectral random walker segmentation";

  auto base = py::register_exception<Error>(m, "RwfastError", PyExc_RuntimeError);
  py::register_exception<InvalidParam>(m, "InvalidParam", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<Image>(m, "Image")
      .def_property_readonly("shape", [](const Image& i) { return py::tuple(py::cast(shape_of(i.dims))); })
      .def_property_readonly("size", &Image::size)
      .def_readonly("spacing", &Image::spacing)
      .def("to_array", &image_to_array)
      .def("__repr__", [](const Image& i) {
        return "<Image " + py::str(py::cast(shape_of(i.dims))).cast<std::string>() + ">";
      });

  m.def("image_from_array", &image_from_array, py::arg("array"), py::arg("spacing") = std::vector<double>{},
        "Image from a 2D or 3D array; values are rescaled to [0, 1].");
  m.def("load_image", [](const std::filesystem::path& p) { return load_image(p); }, py::arg("path"));

  py::class_<SpectralPack, std::shared_ptr<SpectralPack>>(m, "SpectralPack")
      .def_readonly("beta", &SpectralPack::beta)
      .def_readonly("values", &SpectralPack::values)
      .def_property_readonly("size", &SpectralPack::size)
      .def_property_readonly("voxels", &SpectralPack::voxels)
      .def_property_readonly("vectors", [](const SpectralPack& p) { return Eigen::MatrixXd(p.vectors.cast<double>()); })
      .def_property_readonly("image_hash", [](const SpectralPack& p) { return to_hex(p.image_hash); })
      .def("save", [](const SpectralPack& p, const std::filesystem::path& path) { save_pack(p, path); });

  m.def(
      "precompute",
      [](const Image& image, double beta, int m, double eig_tol) {
        PrecomputeOptions o;
        o.eig.tol = eig_tol;
        py::gil_scoped_release release;
        return std::make_shared<SpectralPack>(precompute(image, beta, m, o));
      },
      py::arg("image"), py::arg("beta"), py::arg("m"), py::arg("eig_tol") = 1e-6);
  m.def("load_pack", [](const std::filesystem::path& p) { return std::make_shared<SpectralPack>(load_pack(p)); },
        py::arg("path"));

  m.def(
      "random_walker",
      [](const Image& image, double beta, const Seeds& seeds, int labels, double gamma,
         std::optional<Eigen::MatrixXd> priors, double tol) {
        const LabelProblem p = make_problem(image, seeds, labels, gamma, std::move(priors));
        CgOptions o;
        o.tol = tol;
        Eigen::MatrixXd u;
        {
          py::gil_scoped_release release;
          u = solve_basic(laplacian(build_graph(image, beta), LaplacianMode::Normalized), p, o).values;
        }
        return probabilities_to_array(image.dims, u);
      },
      py::arg("image"), py::arg("beta"), py::arg("seeds"), py::arg("labels"), py::arg("gamma") = 0.0,
      py::arg("priors") = py::none(), py::arg("tol") = 1e-8,
      "Random walker probabilities by conjugate gradients.");

  m.def(
      "segment",
      [](const Image& image, std::shared_ptr<SpectralPack> pack, const Seeds& seeds, int labels,
         double gamma, std::optional<Eigen::MatrixXd> priors, int m_use, bool adaptive, double epsilon,
         std::optional<double> beta) {
        const LabelProblem p = make_problem(image, seeds, labels, gamma, std::move(priors));
        py::dict info;
        Eigen::MatrixXd u;
        FastSolveReport rep;
        bool passed = true;
        {
          py::gil_scoped_release release;
          if (image_content_hash(image) != pack->image_hash) {
            throw ImageMismatch("pack was built from a different image");
          }
          std::unique_ptr<ColumnBasis> basis;
          Laplacian lap;
          if (!beta || *beta == pack->beta) {
            basis = std::make_unique<PackBasis>(*pack);
            lap = laplacian(build_graph(image, pack->beta), LaplacianMode::Normalized);
          } else {
            auto r = std::make_unique<RefreshedPack>(refresh(pack, image, *beta));
            lap = r->laplacian();
            basis = std::move(r);
          }
          FastSolveOptions fo;
          fo.m_use = m_use;
          if (adaptive) {
            AdaptivePolicy policy;
            policy.epsilon = epsilon;
            const MSelection sel = select_m(*basis, lap, p, policy);
            fo.m_use = sel.m_use;
            passed = sel.passed;
          }
          u = solve_fast(*basis, lap, p, fo, &rep).values;
        }
        info["m_use"] = rep.m_use;
        info["adaptive_passed"] = passed;
        info["seconds"] = rep.seconds;
        info["rcond"] = rep.rcond;
        return py::make_tuple(probabilities_to_array(image.dims, u), info);
      },
      py::arg("image"), py::arg("pack"), py::arg("seeds"), py::arg("labels"), py::arg("gamma") = 0.0,
      py::arg("priors") = py::none(), py::arg("m_use") = 0, py::arg("adaptive") = false,
      py::arg("epsilon") = 0.1, py::arg("beta") = py::none(),
      "Fast random walker from a spectral pack. Returns (probabilities, info).");

  m.def(
      "hard_labels",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> u) {
        const auto info = u.request();
        if (info.ndim < 2) throw InvalidParam("probabilities need a trailing label axis");
        const Index k = info.shape.back();
        const Index n = info.size / k;
        std::vector<py::ssize_t> shape(info.shape.begin(), info.shape.end() - 1);
        py::array_t<std::uint16_t> out(shape);
        const double* p = static_cast<const double*>(info.ptr);
        for (Index x = 0; x < n; ++x) {
          const double* row = p + x * k;
          out.mutable_data()[x] = static_cast<std::uint16_t>(std::max_element(row, row + k) - row);
        }
        return out;
      },
      py::arg("probabilities"));

  m.def(
      "dice",
      [](py::array a, py::array b, int labels) {
        const DiceScores d = dice(labels_from_array(a), labels_from_array(b), labels);
        return py::make_tuple(d.per_label, d.mean);
      },
      py::arg("a"), py::arg("b"), py::arg("labels"), "Returns (per_label, mean).");
  m.def(
      "mean_overlap",
      [](py::array a, py::array b, int labels) {
        return mean_overlap(labels_from_array(a), labels_from_array(b), labels);
      },
      py::arg("a"), py::arg("b"), py::arg("labels"));

  m.def(
      "make_phantom",
      [](const std::string& kind, std::vector<Index> shape, std::uint64_t seed, double noise, int regions) {
        PhantomSpec s;
        s.kind = parse_phantom_kind(kind);
        s.dims = Dims{{shape.rbegin(), shape.rend()}};
        s.seed = seed;
        s.noise_sigma = noise;
        s.regions = regions;
        const Phantom ph = make_phantom(s);
        return py::make_tuple(ph.image, labels_to_array(ph.truth), ph.labels);
      },
      py::arg("kind") = "blobs2d", py::arg("shape") = std::vector<Index>{64, 64}, py::arg("seed") = 1,
      py::arg("noise") = 0.05, py::arg("regions") = 3, "Returns (image, truth, labels).");
  m.def(
      "sample_seeds",
      [](py::array truth, int labels, int per_region, std::uint64_t seed) {
        return sample_seeds(labels_from_array(truth), labels, per_region, seed);
      },
      py::arg("truth"), py::arg("labels"), py::arg("per_region"), py::arg("seed") = 0);
}
