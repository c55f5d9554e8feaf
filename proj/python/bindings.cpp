#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deblur/architecture.hpp"
#include "deblur/data.hpp"
#include "deblur/image_io.hpp"
#include "deblur/inference.hpp"
#include "deblur/metrics.hpp"
#include "deblur/model.hpp"
#include "deblur/training.hpp"

namespace py = pybind11;
using namespace deblur;

namespace {

PixelImage image_from_numpy(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() == 2) {
    PixelImage img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)), 1);
    std::memcpy(img.data.data(), arr.data(), img.data.size());
    return img;
  }
  if (arr.ndim() == 3 && (arr.shape(2) == 1 || arr.shape(2) == 3)) {
    PixelImage img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                   static_cast<int>(arr.shape(2)));
    std::memcpy(img.data.data(), arr.data(), img.data.size());
    return img;
  }
  throw std::invalid_argument("expected a uint8 array of shape (H, W), (H, W, 1) or (H, W, 3)");
}

py::array_t<uint8_t> image_to_numpy(const PixelImage& img) {
  py::array_t<uint8_t> arr({img.height, img.width, img.channels});
  std::memcpy(arr.mutable_data(), img.data.data(), img.data.size());
  return arr;
}

ImageTensor tensor_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 4) throw std::invalid_argument("expected a float32 array of shape (N, H, W, C)");
  ImageTensor t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3)));
  std::memcpy(t.data(), arr.data(), t.size() * sizeof(float));
  return t;
}

py::array_t<float> tensor_to_numpy(const ImageTensor& t) {
  py::array_t<float> arr({t.n, t.h, t.w, t.c});
  std::memcpy(arr.mutable_data(), t.data(), t.size() * sizeof(float));
  return arr;
}

py::dict spec_to_dict(const ArchitectureSpec& spec) {
  py::dict d;
  py::list layers;
  for (const auto& l : spec.layers) {
    py::dict ld;
    ld["name"] = l.name;
    ld["kind"] = l.kind == LayerKind::UpsampleConvolution ? "upsample_convolution" : "convolution";
    ld["kernel"] = l.kernel;
    ld["stride"] = l.stride;
    ld["c_in"] = l.c_in;
    ld["c_out"] = l.c_out;
    ld["normalization"] = l.normalization;
    ld["parameters"] = layer_param_count(l);
    layers.append(ld);
  }
  d["name"] = spec.name;
  d["layers"] = layers;
  py::list pairs;
  for (const auto& p : spec.residual_pairs) pairs.append(py::make_tuple(p.first_layer, p.second_layer));
  d["residual_pairs"] = pairs;
  d["global_skip"] = spec.global_skip;
  return d;
}

py::dict audit_to_dict(const AuditReport& r) {
  py::dict d;
  d["network"] = r.network;
  d["conv_total"] = r.conv_total;
  d["norm_total"] = r.norm_total;
  d["grand_total"] = r.grand_total;
  d["declared_total"] = r.declared_total;
  d["total_discrepancy"] = r.total_discrepancy;
  d["mismatches"] = r.mismatches;
  d["text"] = r.to_text();
  return d;
}

TrainConfig config_from_kwargs(const py::dict& kwargs) {
  TrainConfig cfg;
  for (auto item : kwargs) {
    const std::string key = py::cast<std::string>(item.first);
    apply_config_override(cfg, key, py::cast<std::string>(py::str(item.second)));
  }
  return cfg;
}

// Generator handle for inference from python.
class PyGenerator {
 public:
  explicit PyGenerator(uint64_t seed) : net_(build_generator(seed)) {}
  explicit PyGenerator(const std::string& checkpoint)
      : net_(generator_from_checkpoint(load_checkpoint(checkpoint))) {}

  py::array_t<float> forward(const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
    return tensor_to_numpy(generator_forward(net_, tensor_from_numpy(x)));
  }

  py::array_t<uint8_t> deblur(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& img,
                              int patch, int stride) {
    TileOptions opts;
    opts.patch = patch;
    opts.stride = stride;
    return image_to_numpy(deblur_image(net_, image_from_numpy(img), opts));
  }

  long long conv_param_count() const { return net_.conv_param_count(); }

 private:
  nn::NetworkF net_;
};

}  // namespace

PYBIND11_MODULE(pydeblur, m) {
  m.doc() = "GAN motion-deblurring workbench: architecture audit, metrics, data "
            "synthesis, training and inference";

  m.def("generator_spec", [] { return spec_to_dict(generator_spec()); });
  m.def("discriminator_spec", [] { return spec_to_dict(discriminator_spec()); });
  m.def(
      "layer_param_count",
      [](int kernel, int c_in, int c_out) {
        LayerSpec l;
        l.kernel = kernel;
        l.c_in = c_in;
        l.c_out = c_out;
        return layer_param_count(l);
      },
      py::arg("kernel"), py::arg("c_in"), py::arg("c_out"));
  m.def("audit", [] {
    py::dict d;
    d["generator"] = audit_to_dict(audit_architecture(generator_spec()));
    d["discriminator"] = audit_to_dict(audit_architecture(discriminator_spec()));
    return d;
  });

  m.def("normalize", [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& img) {
    return tensor_to_numpy(normalize(image_from_numpy(img)));
  });
  m.def("denormalize", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& t) {
    return image_to_numpy(denormalize(tensor_from_numpy(t)));
  });
  m.def(
      "plan_patches",
      [](int height, int width, int patch, int stride) {
        const PatchGrid g = plan_patches(height, width, patch, stride);
        return g.positions;
      },
      py::arg("height"), py::arg("width"), py::arg("patch") = 256, py::arg("stride") = 256);

  m.def(
      "psnr",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b) {
        return psnr(image_from_numpy(a), image_from_numpy(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "ssim",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b,
         bool per_channel) {
        return ssim(image_from_numpy(a), image_from_numpy(b), per_channel);
      },
      py::arg("a"), py::arg("b"), py::arg("per_channel") = false);

  m.def(
      "make_kernel",
      [](int length, double angle) {
        const MotionBlurKernel k = make_kernel(length, angle);
        py::array_t<double> arr({k.rows, k.cols});
        std::memcpy(arr.mutable_data(), k.taps.data(), k.taps.size() * sizeof(double));
        return arr;
      },
      py::arg("length"), py::arg("angle"));
  m.def(
      "apply_blur",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& img, int length,
         double angle) {
        return image_to_numpy(apply_blur(image_from_numpy(img), make_kernel(length, angle)));
      },
      py::arg("img"), py::arg("length"), py::arg("angle"));
  m.def(
      "make_synthetic_dataset",
      [](int n, int size, uint64_t seed, const std::string& out, const std::string& split) {
        const DatasetManifest m2 = make_synthetic_dataset(n, size, seed, out, split);
        std::vector<std::tuple<std::string, std::string, std::string>> entries;
        for (const auto& e : m2.entries) entries.emplace_back(e.id, e.blur_path, e.sharp_path);
        return entries;
      },
      py::arg("n"), py::arg("size"), py::arg("seed"), py::arg("out"),
      py::arg("split") = "train");

  m.def(
      "train",
      [](const py::kwargs& kwargs) {
        const TrainConfig cfg = config_from_kwargs(kwargs);
        const Checkpoint ckpt = train(cfg);
        py::dict d;
        d["completed_epochs"] = ckpt.completed_epochs;
        d["completed_steps"] = ckpt.completed_steps;
        d["checkpoint"] = cfg.out_dir + "/checkpoint_latest.bin";
        d["step_log"] = cfg.out_dir + "/steps.tsv";
        return d;
      },
      "run the training protocol; keyword arguments mirror the config-file keys");

  m.def(
      "evaluate",
      [](const std::string& dataset_root, const std::string& split,
         const std::string& checkpoint, int patch, int stride) {
        const DatasetManifest manifest = scan_manifest(dataset_root, split);
        std::optional<nn::NetworkF> gen;
        if (!checkpoint.empty())
          gen = generator_from_checkpoint(load_checkpoint(checkpoint));
        EvalOptions opts;
        opts.patch = patch;
        opts.stride = stride;
        const MetricReport r = evaluate_dataset(gen ? &*gen : nullptr, manifest, opts);
        py::dict d;
        py::list rows;
        for (const auto& row : r.per_image)
          rows.append(py::make_tuple(row.id, row.psnr, row.ssim));
        d["per_image"] = rows;
        d["psnr"] = py::make_tuple(r.psnr_max, r.psnr_min, r.psnr_mean);
        d["ssim"] = py::make_tuple(r.ssim_max, r.ssim_min, r.ssim_mean);
        d["infinite_psnr_count"] = r.infinite_psnr_count;
        d["text"] = r.to_text();
        return d;
      },
      py::arg("dataset_root"), py::arg("split") = "test", py::arg("checkpoint") = "",
      py::arg("patch") = 256, py::arg("stride") = 128);

  py::class_<PyGenerator>(m, "Generator")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def_static("load", [](const std::string& path) { return PyGenerator(path); },
                  py::arg("checkpoint"))
      .def("forward", &PyGenerator::forward, py::arg("batch"),
           "run the network on a float32 (N, H, W, 3) tensor in [-1, 1]")
      .def("deblur", &PyGenerator::deblur, py::arg("image"), py::arg("patch") = 256,
           py::arg("stride") = 128, "tiled full-image restoration on a uint8 (H, W, 3) array")
      .def_property_readonly("conv_param_count", &PyGenerator::conv_param_count);
}
