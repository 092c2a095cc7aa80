/* Wire constants shared with the control socket. */
#ifndef BFDD_BFDCTL_H
#define BFDD_BFDCTL_H

#define BFD_VERSION 1
#define BFD_PKT_LEN 24
#define BFD_PKT_INFO_LEN 1516

#define BFD_GETVER(diag) (((diag) >> 5) & 0x07)
#define BFD_SETVER(diag, val) ((diag) |= (val & 0x07) << 5)
#define BFD_GETSTATE(flags) (((flags) >> 6) & 0x03)

#define BFD_PBIT 0x20
#define BFD_FBIT 0x10
#define BFD_CBIT 0x08
#define BFD_ABIT 0x04
#define BFD_DEMANDBIT 0x02
#define BFD_MBIT 0x01

#endif
