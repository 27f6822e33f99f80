#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Low-level compute kernels, templated on the scalar type: the training engine
// instantiates them with float, the shadow replay used by gradient checks with
// double. Everything here is sequential with a fixed iteration order, so a
// given input always produces bit-identical output.

namespace plae::detail {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

inline int conv_transpose_out_dim(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

// C[m,n] += A[m,p] * B[p,n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + std::size_t(i) * p;
        T* crow = c + std::size_t(i) * n;
        for (int k = 0; k < p; ++k) {
            const T av = arow[k];
            const T* brow = b + std::size_t(k) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A^T * B where A is stored [p,m], B is [p,n]
template <typename T>
void gemm_ta_acc(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int k = 0; k < p; ++k) {
        const T* arow = a + std::size_t(k) * m;
        const T* brow = b + std::size_t(k) * n;
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A * B^T where A is [m,p], B is stored [n,p]
template <typename T>
void gemm_bt_acc(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + std::size_t(i) * p;
        T* crow = c + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + std::size_t(j) * p;
            T acc = T(0);
            for (int k = 0; k < p; ++k) acc += arow[k] * brow[k];
            crow[j] += acc;
        }
    }
}

// One image [C,H,W] -> cols[(c*kh+ki)*kw+kj][oh*OW+ow]; out-of-range reads are 0.
template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride, int pad,
            T* cols, int OH, int OW) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                T* dst = cols + (std::size_t((c * kh + ki) * kw + kj)) * OH * OW;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) {
                        for (int ow = 0; ow < OW; ++ow) dst[oh * OW + ow] = T(0);
                        continue;
                    }
                    const T* src = img + (std::size_t(c) * H + ih) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kj;
                        dst[oh * OW + ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: img[C,H,W] += scatter(cols).
template <typename T>
void col2im_acc(const T* cols, int C, int H, int W, int kh, int kw, int stride, int pad,
                T* img, int OH, int OW) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const T* src = cols + (std::size_t((c * kh + ki) * kw + kj)) * OH * OW;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) continue;
                    T* dst = img + (std::size_t(c) * H + ih) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kj;
                        if (iw >= 0 && iw < W) dst[iw] += src[oh * OW + ow];
                    }
                }
            }
        }
    }
}

// Cross-correlation (no kernel flip). x [N,C,H,W], k [K,C,kh,kw], b [K] or null,
// y [N,K,OH,OW] overwritten.
template <typename T>
void conv2d_fwd(const T* x, const T* k, const T* b, T* y,
                int N, int C, int H, int W, int K, int kh, int kw, int stride, int pad) {
    const int OH = conv_out_dim(H, kh, stride, pad);
    const int OW = conv_out_dim(W, kw, stride, pad);
    const std::size_t col_rows = std::size_t(C) * kh * kw;
    std::vector<T> cols(col_rows * OH * OW);
    for (int n = 0; n < N; ++n) {
        const T* xi = x + std::size_t(n) * C * H * W;
        T* yi = y + std::size_t(n) * K * OH * OW;
        im2col(xi, C, H, W, kh, kw, stride, pad, cols.data(), OH, OW);
        for (int kc = 0; kc < K; ++kc) {
            const T bias = b ? b[kc] : T(0);
            T* row = yi + std::size_t(kc) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) row[i] = bias;
        }
        gemm_acc(k, cols.data(), yi, K, int(col_rows), OH * OW);
    }
}

// Gradients of conv2d_fwd. Any of gx/gk/gb may be null; non-null buffers are
// accumulated into.
template <typename T>
void conv2d_bwd(const T* x, const T* k, const T* gy,
                T* gx, T* gk, T* gb,
                int N, int C, int H, int W, int K, int kh, int kw, int stride, int pad) {
    const int OH = conv_out_dim(H, kh, stride, pad);
    const int OW = conv_out_dim(W, kw, stride, pad);
    const std::size_t col_rows = std::size_t(C) * kh * kw;
    std::vector<T> cols(col_rows * OH * OW);
    for (int n = 0; n < N; ++n) {
        const T* xi = x + std::size_t(n) * C * H * W;
        const T* gyi = gy + std::size_t(n) * K * OH * OW;
        if (gx) {
            std::fill(cols.begin(), cols.end(), T(0));
            gemm_ta_acc(k, gyi, cols.data(), int(col_rows), K, OH * OW);
            col2im_acc(cols.data(), C, H, W, kh, kw, stride, pad,
                       gx + std::size_t(n) * C * H * W, OH, OW);
        }
        if (gk) {
            im2col(xi, C, H, W, kh, kw, stride, pad, cols.data(), OH, OW);
            gemm_bt_acc(gyi, cols.data(), gk, K, OH * OW, int(col_rows));
        }
        if (gb) {
            for (int kc = 0; kc < K; ++kc) {
                const T* row = gyi + std::size_t(kc) * OH * OW;
                T acc = T(0);
                for (int i = 0; i < OH * OW; ++i) acc += row[i];
                gb[kc] += acc;
            }
        }
    }
}

// Transposed convolution. x [N,K,H,W], k [K,C,kh,kw], b [C] or null,
// y [N,C,OH,OW] overwritten with OH = (H-1)*stride - 2*pad + kh.
template <typename T>
void conv2d_transpose_fwd(const T* x, const T* k, const T* b, T* y,
                          int N, int K, int H, int W, int C, int kh, int kw,
                          int stride, int pad) {
    const int OH = conv_transpose_out_dim(H, kh, stride, pad);
    const int OW = conv_transpose_out_dim(W, kw, stride, pad);
    const std::size_t col_rows = std::size_t(C) * kh * kw;
    std::vector<T> cols(col_rows * H * W);
    for (int n = 0; n < N; ++n) {
        const T* xi = x + std::size_t(n) * K * H * W;
        T* yi = y + std::size_t(n) * C * OH * OW;
        for (int c = 0; c < C; ++c) {
            const T bias = b ? b[c] : T(0);
            T* row = yi + std::size_t(c) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) row[i] = bias;
        }
        std::fill(cols.begin(), cols.end(), T(0));
        gemm_ta_acc(k, xi, cols.data(), int(col_rows), K, H * W);
        col2im_acc(cols.data(), C, OH, OW, kh, kw, stride, pad, yi, H, W);
    }
}

template <typename T>
void conv2d_transpose_bwd(const T* x, const T* k, const T* gy,
                          T* gx, T* gk, T* gb,
                          int N, int K, int H, int W, int C, int kh, int kw,
                          int stride, int pad) {
    const int OH = conv_transpose_out_dim(H, kh, stride, pad);
    const int OW = conv_transpose_out_dim(W, kw, stride, pad);
    const std::size_t col_rows = std::size_t(C) * kh * kw;
    std::vector<T> cols(col_rows * H * W);
    for (int n = 0; n < N; ++n) {
        const T* xi = x + std::size_t(n) * K * H * W;
        const T* gyi = gy + std::size_t(n) * C * OH * OW;
        if (gx || gk) {
            im2col(gyi, C, OH, OW, kh, kw, stride, pad, cols.data(), H, W);
        }
        if (gx) {
            gemm_acc(k, cols.data(), gx + std::size_t(n) * K * H * W, K, int(col_rows), H * W);
        }
        if (gk) {
            gemm_bt_acc(xi, cols.data(), gk, K, H * W, int(col_rows));
        }
        if (gb) {
            for (int c = 0; c < C; ++c) {
                const T* row = gyi + std::size_t(c) * OH * OW;
                T acc = T(0);
                for (int i = 0; i < OH * OW; ++i) acc += row[i];
                gb[c] += acc;
            }
        }
    }
}

// y [N,G] = x [N,F] * w [F,G] + b [G]
template <typename T>
void dense_fwd(const T* x, const T* w, const T* b, T* y, int N, int F, int G) {
    for (int n = 0; n < N; ++n) {
        T* row = y + std::size_t(n) * G;
        for (int g = 0; g < G; ++g) row[g] = b ? b[g] : T(0);
    }
    gemm_acc(x, w, y, N, F, G);
}

template <typename T>
void relu_fwd(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void sigmoid_fwd(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
T mse_fwd(const T* a, const T* b, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = a[i] - b[i];
        acc += d * d;
    }
    return acc / T(n);
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
T softmax_ce_fwd(const T* logits, const int* labels, int N, int C) {
    T acc = T(0);
    for (int n = 0; n < N; ++n) {
        const T* row = logits + std::size_t(n) * C;
        T mx = row[0];
        for (int c = 1; c < C; ++c) mx = row[c] > mx ? row[c] : mx;
        T sum = T(0);
        for (int c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
        acc += std::log(sum) + mx - row[labels[n]];
    }
    return acc / T(N);
}

// Zero-pad [N,C,S,S] to [N,C,Tside,Tside] with the image centered.
template <typename T>
void pad_center_fwd(const T* x, T* y, int N, int C, int S, int Tside) {
    const int off = (Tside - S) / 2;
    std::fill(y, y + std::size_t(N) * C * Tside * Tside, T(0));
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const T* src = x + (std::size_t(n) * C + c) * S * S;
            T* dst = y + (std::size_t(n) * C + c) * Tside * Tside;
            for (int i = 0; i < S; ++i) {
                for (int j = 0; j < S; ++j) dst[(i + off) * Tside + (j + off)] = src[i * S + j];
            }
        }
    }
}

// Max pooling without padding; argmax written as flat input offsets per image.
template <typename T>
void maxpool_fwd(const T* x, T* y, int* argmax,
                 int N, int C, int H, int W, int k, int stride) {
    const int OH = conv_out_dim(H, k, stride, 0);
    const int OW = conv_out_dim(W, k, stride, 0);
    for (int n = 0; n < N; ++n) {
        const T* xi = x + std::size_t(n) * C * H * W;
        for (int c = 0; c < C; ++c) {
            const T* plane = xi + std::size_t(c) * H * W;
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    int best = (oh * stride) * W + (ow * stride);
                    T bv = plane[best];
                    for (int ki = 0; ki < k; ++ki) {
                        for (int kj = 0; kj < k; ++kj) {
                            const int idx = (oh * stride + ki) * W + (ow * stride + kj);
                            if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
                        }
                    }
                    const std::size_t out = ((std::size_t(n) * C + c) * OH + oh) * OW + ow;
                    y[out] = bv;
                    if (argmax) argmax[out] = c * H * W + best;
                }
            }
        }
    }
}

} // namespace plae::detail
