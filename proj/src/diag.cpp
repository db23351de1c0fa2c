#include "tineuvox/diag.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "tineuvox/image.hpp"

namespace tnv {

void write_diagnostics(const Checkpoint& ck, const std::string& out_dir) {
  if (ck.stride_grad_norms.empty())
    throw state_error("checkpoint carries no per-stride gradient norms (model never trained)");
  const Model<float>& model = ck.model;
  if (ck.stride_grad_norms.size() != static_cast<std::size_t>(model.grid.num_strides()))
    throw state_error("per-stride gradient norm count does not match the grid's stride count");

  std::filesystem::create_directories(out_dir);
  char buf[160];

  std::ostringstream grads;
  grads << "stride,grad_norm\n";
  for (std::size_t m = 0; m < ck.stride_grad_norms.size(); ++m) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g\n", model.grid.strides()[m],
                  ck.stride_grad_norms[m]);
    grads << buf;
  }
  atomic_write_file(out_dir + "/stride_grads.csv", grads.str());

  std::ostringstream field;
  field << "t,x,y,z,dx,dy,dz\n";
  const Vec3d lo = model.grid.bbox_min();
  const Vec3d hi = model.grid.bbox_max();
  const int kGrid = 5;
  const double times[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  typename TimeNet<float>::Tape time_tape;
  typename DeformNet<float>::Tape deform_tape;
  for (double t : times) {
    MatX<float> time_in(1, 1);
    time_in(0, 0) = static_cast<float>(t);
    MatX<float> gamma_t;
    positional_encode<float>(time_in, model.pe_t, gamma_t);
    model.time_net.forward(gamma_t.col(0), time_tape);

    const int n = kGrid * kGrid * kGrid;
    MatX<float> pos(3, n);
    int col = 0;
    for (int ix = 0; ix < kGrid; ++ix)
      for (int iy = 0; iy < kGrid; ++iy)
        for (int iz = 0; iz < kGrid; ++iz, ++col) {
          // Interior fractions 0.1 .. 0.9 keep samples off the bbox walls.
          const Vec3d f(0.1 + 0.8 * ix / (kGrid - 1), 0.1 + 0.8 * iy / (kGrid - 1),
                        0.1 + 0.8 * iz / (kGrid - 1));
          pos.col(col) = (lo + f.cwiseProduct(hi - lo)).cast<float>();
        }
    MatX<float> gamma_p;
    positional_encode<float>(pos, model.pe_x, gamma_p);
    MatX<float> deform_in(gamma_p.rows() + time_tape.out.size(), n);
    deform_in.topRows(gamma_p.rows()) = gamma_p;
    deform_in.bottomRows(time_tape.out.size()).colwise() = time_tape.out;
    model.deform_net.forward(deform_in, deform_tape);

    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", t, pos(0, i),
                    pos(1, i), pos(2, i), deform_tape.out(0, i), deform_tape.out(1, i),
                    deform_tape.out(2, i));
      field << buf;
    }
  }
  atomic_write_file(out_dir + "/deform_field.csv", field.str());
}

}  // namespace tnv
