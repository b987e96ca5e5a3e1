package org.owasp.benchmark.testcode;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

@WebServlet(value = "/hash-00/BenchmarkTest00047")
public class BenchmarkTest00047 extends HttpServlet {

    private static final long serialVersionUID = 1L;

    @Override
    public void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        response.setContentType("text/html;charset=UTF-8");

        String param = request.getParameter("BenchmarkTest00047");
        if (param == null) param = "";

        String bar = param;

        try {
            java.security.MessageDigest md = java.security.MessageDigest.getInstance("SHA-384");
            md.update(param.getBytes("UTF-8"));
            byte[] result = md.digest();
        } catch (Exception e) {
            throw new ServletException(e);
        }
    }
}
