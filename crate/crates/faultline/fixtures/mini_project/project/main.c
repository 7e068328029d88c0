#include <stdio.h>

int parse_header(const char *path);

int main(int argc, char **argv)
{
    int rc;

    if (argc < 2) {
        fprintf(stderr, "usage: %s <input-file>\n", argv[0]);
        return 2;
    }
    rc = parse_header(argv[1]);
    if (rc != 0)
        return rc;
    printf("ok\n");
    return 0;
}
